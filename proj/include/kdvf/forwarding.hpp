#pragma once
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "kdv.hpp"
#include "kernel.hpp"
#include "lyapunov.hpp"
#include "mprofile.hpp"
#include "observer.hpp"

namespace kdvf {

struct ControllerState {
    double eta = 0.0;
    double k = 0.0;
    double r = 0.0;
};

struct EquilibriumResult {
    Field w_inf;
    double eta_inf = 0.0;
    double u_inf = 0.0; // slope w_inf'(L) = k eta_inf
    double residual = 0.0;
    int iterations = 0;
    std::optional<double> contraction_est;
    double rcond = 0.0;
};

struct MCertificate {
    double M0 = 0.0, ML = 0.0, dM0 = 0.0, ode = 0.0;
};

// Closed-form checks M(0) = M(L) = 0, M'(0) = -1, M''' + M' = 0 at every node.
inline MCertificate m_profile_certificate(const Grid& g)
{
    MClosedForm m(g.L);
    MCertificate c;
    c.M0 = std::abs(m.value(0.0));
    c.ML = std::abs(m.value(g.L));
    c.dM0 = std::abs(m.d1(0.0) + 1.0);
    for (int i = 0; i <= g.n; ++i)
        c.ode = std::max(c.ode, std::abs(m.d3(g.x(i)) + m.d1(g.x(i))));
    return c;
}

namespace detail {

inline double wide_derivative(const Field& w, int i, int order)
{
    const int n = w.grid.n;
    int first = std::clamp(i - 3, 0, n - 6);
    auto s = stencil(w.grid, i, first, 7, order);
    double d = 0.0;
    for (int k = 0; k < 7; ++k)
        d += s[k] * w.v[first + k];
    return d;
}

} // namespace detail

// int M (w' + w''') dx + k_eta + w'(0), for w(0) = w(L) = 0 and w'(L) = k_eta.
inline double sylvester_residual(const Field& M, const Field& w, double k_eta)
{
    const Grid& g = w.grid;
    const int n = g.n;
    if (!(M.grid == g))
        throw PreconditionError("M and w grids differ");
    double wx0 = detail::wide_derivative(w, 0, 1);
    double wxL = detail::wide_derivative(w, n, 1);
    if (std::abs(w.v[0]) > 1e-6 || std::abs(w.v[n]) > 1e-6 || std::abs(wxL - k_eta) > 1e-6 * (1.0 + std::abs(k_eta)))
        throw PreconditionError("sylvester_residual needs w(0) = w(L) = 0 and w'(L) = k_eta");
    Field f(g);
    for (int i = 0; i <= n; ++i)
        f.v[i] = M.v[i] * (detail::wide_derivative(w, i, 1) + detail::wide_derivative(w, i, 3));
    return integrate(f) + k_eta + wx0;
}

enum class GainMode { linear, nonlinear };

inline double admissible_gain(const LyapunovConstants& c, const Field& M, GainMode mode, double safety = 1.0,
                              double k1_cap = std::numeric_limits<double>::infinity())
{
    double Mn = l2_norm(M);
    double k0 = k0_star_from(c.sigma2, Mn, c.alpha);
    if (mode == GainMode::linear)
        return k0;
    double k2 = safety * c.alpha / (c.alpha * c.sigma1 + 4.0 * Mn * Mn);
    return std::min({k0, k1_cap, k2});
}

inline std::pair<ControllerState, double> controller_step(const ControllerState& c, double y, double dt)
{
    if (!std::isfinite(y))
        throw PreconditionError("controller received a non-finite output");
    ControllerState out = c;
    out.eta = c.eta + dt * (y - c.r);
    return {out, out.k * out.eta};
}

namespace detail {

// Steady rows of the discrete plant: A w + g u + d (- w D1 w) = 0 at interior nodes, y_h(w) = r.
// Unknowns are w_1..w_{n-1} and u.
struct SteadySystem {
    Mat S;
    Eigen::PartialPivLU<Mat> lu;
    SpMat A, D1;
    Vec g;
    double rcond = 0.0;

    explicit SteadySystem(const Grid& grid)
    {
        LinearStepOperator op(KdvParams{grid, 1.0, 1.0, false});
        A = op.A();
        D1 = op.D1();
        g = op.g();
        const int n = grid.n;
        S = Mat::Zero(n, n);
        Mat Ad = Mat(A);
        S.topLeftCorner(n - 1, n - 1) = Ad.block(1, 1, n - 1, n - 1);
        S.block(0, n - 1, n - 1, 1) = g.segment(1, n - 1);
        S(n - 1, 0) = 4.0 / (2.0 * grid.h);
        S(n - 1, 1) = -1.0 / (2.0 * grid.h);
        lu.compute(S);
        rcond = lu.rcond();
        if (!(rcond > 1e-13))
            throw NumericalSetupError("equilibrium problem is ill-conditioned (rcond " + fmt17(rcond) +
                                      "); L is near-critical");
    }

    // returns (w on all nodes, u)
    std::pair<Vec, double> solve(const Vec& src, double r) const
    {
        const int n = static_cast<int>(S.rows());
        Vec rhs(n);
        rhs.head(n - 1) = -src.segment(1, n - 1);
        rhs[n - 1] = r;
        Vec z = lu.solve(rhs);
        Vec w = Vec::Zero(n + 1);
        w.segment(1, n - 1) = z.head(n - 1);
        return {w, z[n - 1]};
    }

    double residual(const Grid& grid, const Vec& w, double u, const Vec& d, bool nonlinear) const
    {
        Vec r = A * w + g * u + d;
        if (nonlinear)
            r -= w.cwiseProduct(D1 * w);
        return std::sqrt(grid.h * r.segment(1, grid.n - 1).squaredNorm());
    }
};

} // namespace detail

inline EquilibriumResult linear_equilibrium(const Field& d, double r, double k, const Grid& g)
{
    if (!(k > 0.0))
        throw ConfigError("integral gain k must be positive");
    if (auto wit = is_critical_length(g.L))
        throw CriticalLengthError(wit->k, wit->l, "L is a critical length");
    detail::SteadySystem sys(g);
    auto [w, u] = sys.solve(d.v, r);
    EquilibriumResult res;
    res.w_inf = Field(g, w);
    res.u_inf = u;
    res.eta_inf = u / k;
    res.residual = sys.residual(g, w, u, d.v, false) / (1.0 + l2_norm(d));
    res.iterations = 0;
    res.rcond = sys.rcond;
    return res;
}

// Picard iteration  w_{j+1}' + w_{j+1}''' = d - w_j w_j'.
inline EquilibriumResult nonlinear_equilibrium(const Field& d, double r, double k, const Grid& g, int max_iter = 30,
                                               double tol = 1e-10)
{
    if (!(k > 0.0))
        throw ConfigError("integral gain k must be positive");
    if (auto wit = is_critical_length(g.L))
        throw CriticalLengthError(wit->k, wit->l, "L is a critical length");
    detail::SteadySystem sys(g);
    Vec w = Vec::Zero(g.nodes());
    double u = 0.0, prev = -1.0;
    EquilibriumResult res;
    res.rcond = sys.rcond;
    for (int it = 1; it <= max_iter; ++it) {
        Vec src = d.v - w.cwiseProduct(sys.D1 * w);
        auto [wn, un] = sys.solve(src, r);
        double delta = l2_norm(Field(g, wn - w));
        if (!std::isfinite(delta))
            throw NonContractionError("fixed-point iteration diverged at iteration " + std::to_string(it));
        if (prev > 0.0)
            res.contraction_est = delta / prev;
        w = wn;
        u = un;
        prev = delta;
        res.iterations = it;
        if (delta < tol) {
            res.w_inf = Field(g, w);
            res.u_inf = u;
            res.eta_inf = u / k;
            res.residual = sys.residual(g, w, u, d.v, true);
            return res;
        }
    }
    throw NonContractionError("fixed-point iteration did not converge in " + std::to_string(max_iter) +
                              " iterations (last step " + fmt17(prev) + ")");
}

struct Design {
    double lambda = 1.0;
    Kernel2D P, Q;
    Field p, M;
    KernelSolveReport repP, repQ;
    LyapunovConstants consts;
};

inline Design make_design(double lambda, const Grid& g)
{
    Design d;
    d.lambda = lambda;
    std::tie(d.P, d.repP) = solve_kernel_P(lambda, g);
    std::tie(d.Q, d.repQ) = solve_kernel_Q(lambda, d.P);
    d.p = gain_p(d.P);
    d.M = M_profile(g);
    d.consts = compute_constants(lambda, d.Q, d.p);
    return d;
}

inline Design make_design(double lambda, Kernel2D P, Kernel2D Q)
{
    Design d;
    d.lambda = lambda;
    d.P = std::move(P);
    d.Q = std::move(Q);
    d.repP = kernel_residual(KernelKind::P, lambda, d.P);
    d.repQ = kernel_residual(KernelKind::Q, lambda, d.Q);
    d.repP.constraint_residual = boundary_violation(KernelKind::P, d.P);
    d.repQ.constraint_residual = boundary_violation(KernelKind::Q, d.Q);
    d.p = gain_p(d.P);
    d.M = M_profile(d.P.grid);
    d.consts = compute_constants(lambda, d.Q, d.p);
    return d;
}

struct ClosedLoopConfig {
    KdvParams params;
    double k = 0.0;
    double r = 0.0;
    double eta0 = 0.0;
    Field d1;              // constant distributed input
    Field w0;
    double T = 1.0;
    int record_every = 1;
    bool snapshots = false;
    bool override_safety = false;
    double k_bound = std::numeric_limits<double>::infinity();
};

struct ClosedLoopRun {
    Grid grid;
    TimeSeries series;
    std::optional<EquilibriumResult> eq;
    std::vector<double> eta;   // eta at each record
    double guard_violation_time = -1.0;
};

// Plant with w_x(L) = k eta, eta' = y - r. Columns use deviations from the equilibrium when available.
inline ClosedLoopRun closed_loop_simulate(const ClosedLoopConfig& cfg, const Design& des,
                                          std::optional<EquilibriumResult> eq = std::nullopt)
{
    const KdvParams& P = cfg.params;
    const Grid& g = P.grid;
    if (!cfg.override_safety) {
        if (auto wit = is_critical_length(g.L))
            throw CriticalLengthError(wit->k, wit->l, "L is a critical length");
        if (!(cfg.k > 0.0) || cfg.k >= cfg.k_bound)
            throw ConfigError("integral gain k = " + fmt17(cfg.k) + " is outside (0, " + fmt17(cfg.k_bound) + ")");
    }
    if (cfg.record_every < 1)
        throw ConfigError("record_every must be >= 1");

    ClosedLoopRun run;
    run.grid = g;
    run.eq = std::move(eq);
    LinearStepOperator op(P);
    const Vec d1v = cfg.d1.v;
    InputSignals in;
    if (cfg.d1.v.size() == g.nodes() && cfg.d1.v.cwiseAbs().maxCoeff() > 0.0)
        in.d1 = [d1v](double) { return d1v; };

    Field w_ref(g);
    double eta_ref = 0.0;
    if (run.eq) {
        w_ref = run.eq->w_inf;
        eta_ref = run.eq->eta_inf;
    }
    TimeSeries& ts = run.series;
    ts.columns = {"t", "eta", "y", "e", "E", "U", "V", "V_full", "x_distance", "wall_clock"};
    auto t_start = std::chrono::steady_clock::now();
    auto record = [&](double t, double eta, const Field& w) {
        Field dw = w - w_ref;
        double de = eta - eta_ref;
        double y = boundary_slope(w, Side::left);
        double E = energy(w);
        double U = functional_U(des.Q, dw);
        double V = functional_V(des.Q, des.consts, dw);
        double Vf = functional_V_full(des.Q, des.consts, des.M, de, dw);
        double xd = std::sqrt(de * de + energy(dw));
        double wc = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        ts.rows.push_back({t, eta, y, y - cfg.r, E, U, V, Vf, xd, wc});
        run.eta.push_back(eta);
        if (cfg.snapshots)
            ts.snapshots.push_back(w.v);
    };

    KdvState s{0.0, cfg.w0};
    ControllerState ctrl{cfg.eta0, cfg.k, cfg.r};
    double u = cfg.k * ctrl.eta;
    record(0.0, ctrl.eta, s.w);
    const long steps = std::lround(cfg.T / P.dt);
    for (long n = 1; n <= steps; ++n) {
        if (P.nonlinear && run.guard_violation_time < 0.0 && P.dt > convective_dt_limit(g, s.w.v))
            run.guard_violation_time = s.t;
        double y = boundary_slope(s.w, Side::left);
        auto [next, un] = controller_step(ctrl, y, P.dt);
        try {
            s = step_slopes(s, P, in, u, un, op);
        } catch (const BlowUpError& e) {
            ts.blew_up = true;
            ts.blowup_time = e.time;
            return run;
        }
        ctrl = next;
        u = un;
        if (n % cfg.record_every == 0 || n == steps)
            record(s.t, ctrl.eta, s.w);
    }
    return run;
}

struct RegulationReport {
    double tail_sup_e = 0.0;
    double final_e = 0.0;
    std::optional<DecayFit> x_fit;
    std::optional<DecayFit> wt_fit;
    double identity_pass_fraction = 1.0;
    long identity_steps = 0;
};

// Needs snapshots for the w_t proxy and the energy identity.
inline RegulationReport regulation_diagnostics(const ClosedLoopRun& run, double k, double identity_tol = 0.05)
{
    const TimeSeries& ts = run.series;
    if (ts.size() < 2)
        throw InsufficientDataError("regulation diagnostics need at least two records");
    RegulationReport rep;
    auto t = ts.column("t");
    auto e = ts.column("e");
    auto xd = ts.column("x_distance");
    std::size_t tail0 = ts.size() - std::max<std::size_t>(1, ts.size() / 10);
    for (std::size_t i = tail0; i < ts.size(); ++i)
        rep.tail_sup_e = std::max(rep.tail_sup_e, std::abs(e[i]));
    rep.final_e = e.back();

    bool zero = std::all_of(xd.begin(), xd.end(), [](double v) { return v == 0.0; });
    if (zero)
        return rep;
    try {
        rep.x_fit = fit_exponential(t, xd);
    } catch (const InsufficientDataError&) {
    }
    if (!ts.has_snapshots())
        return rep;

    const Grid& g = run.grid;
    Field wref = run.eq ? run.eq->w_inf : Field(g);
    double eref = run.eq ? run.eq->eta_inf : 0.0;
    std::vector<double> tt, wt;
    long ok = 0, tot = 0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        double dt = t[i + 1] - t[i];
        Field a(g, ts.snapshots[i]), b(g, ts.snapshots[i + 1]);
        Field dwt(g, (b.v - a.v) / dt);
        tt.push_back(0.5 * (t[i] + t[i + 1]));
        wt.push_back(l2_norm(dwt));
        // k^2 eta~^2 - w~_x(0)^2 - 2 int w~ w~_t = 0 for the deviation from equilibrium
        Field mid(g, 0.5 * (a.v + b.v) - wref.v);
        double et = run.eta[i + 1] - eref;
        double y = boundary_slope(mid, Side::left);
        double cross = 2.0 * integrate(Field(g, mid.v.cwiseProduct(dwt.v)));
        double lhs = k * k * et * et - y * y - cross;
        double scale = k * k * et * et + y * y + std::abs(cross);
        ++tot;
        if (std::abs(lhs) <= identity_tol * scale || scale == 0.0)
            ++ok;
    }
    rep.identity_steps = tot;
    rep.identity_pass_fraction = tot ? double(ok) / double(tot) : 1.0;
    try {
        rep.wt_fit = fit_exponential(tt, wt);
    } catch (const InsufficientDataError&) {
    }
    return rep;
}

// Largest scale s in [0, max_scale] along `direction` for which the closed loop converges.
inline double basin_probe(const ClosedLoopConfig& tmpl, const Design& des, const Field& direction, double max_scale,
                          double e_tol, int bisections = 12)
{
    if (direction.v.cwiseAbs().maxCoeff() == 0.0)
        throw PreconditionError("basin probe direction is zero");
    if (!tmpl.params.nonlinear)
        return max_scale;
    auto passes = [&](double s) {
        ClosedLoopConfig c = tmpl;
        c.w0 = s * direction;
        c.snapshots = false;
        c.record_every = std::max(1, static_cast<int>(std::lround(c.T / c.params.dt)));
        try {
            auto run = closed_loop_simulate(c, des);
            if (run.series.blew_up)
                return false;
            return std::abs(run.series.rows.back()[run.series.col("e")]) < e_tol;
        } catch (const BlowUpError&) {
            return false;
        }
    };
    if (passes(max_scale))
        return max_scale;
    double lo = 0.0, hi = max_scale;
    for (int i = 0; i < bisections; ++i) {
        double mid = 0.5 * (lo + hi);
        if (passes(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

} // namespace kdvf
