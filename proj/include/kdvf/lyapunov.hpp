#pragma once
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kdv.hpp"
#include "kernel.hpp"
#include "mprofile.hpp"

namespace kdvf {

struct LyapunovConstants {
    double lambda = 0.0;
    double c_under = 0.0, c_bar = 0.0;
    double rho1 = 0.0, rho2 = 0.0;
    double p_bar = 0.0;
    double alpha = 0.0;
    double sigma1 = 0.0, sigma2 = 0.0;
    double k0_star = 0.0;
    double M_norm = 0.0;
};

struct DissipationReport {
    long steps_checked = 0;
    long violations = 0;
    double worst_margin = 0.0; // most positive (lhs - bound - slack); <= 0 means pass
    double worst_time = 0.0;
    double slack_used = 0.0;   // largest slack a passing step needed

    double pass_fraction() const
    {
        return steps_checked ? 1.0 - double(violations) / double(steps_checked) : 1.0;
    }
};

inline double functional_U(const Kernel2D& Q, const Field& w) { return energy(apply_Pi_bar_inv(Q, w)); }

inline double k0_star_from(double sigma2, double M_norm, double alpha)
{
    return 1.0 / (0.5 * sigma2 + M_norm / (4.0 * alpha));
}

inline LyapunovConstants compute_constants(double lambda, const Kernel2D& Q, const Field& p)
{
    if (!(lambda > 0.0))
        throw ConfigError("lambda must be positive");
    LyapunovConstants c;
    c.lambda = lambda;
    c.p_bar = energy(p);
    if (!(c.p_bar > 0.0))
        throw DegenerateError("observer gain p is identically zero");
    auto ob = operator_bounds(Q);
    c.c_under = ob.c_under;
    c.c_bar = ob.c_bar;
    c.rho1 = 2.0 * c.c_bar / lambda;
    c.rho2 = 1.0 + 2.0 / lambda * energy(kernel_dz(Q, Side::right));
    c.alpha = c.c_under / (4.0 * c.p_bar * c.rho1);
    c.sigma1 = 4.0 * c.p_bar * c.rho1 / c.c_under + 1.0 / c.p_bar;
    c.sigma2 = 1.0 + c.rho2 / (2.0 * c.p_bar * c.rho1);
    c.M_norm = l2_norm(M_profile(Q.grid));
    c.k0_star = k0_star_from(c.sigma2, c.M_norm, c.alpha);
    return c;
}

inline double functional_V(const Kernel2D& Q, const LyapunovConstants& c, const Field& w)
{
    return energy(w) + functional_U(Q, w) / (2.0 * c.p_bar * c.rho1);
}

inline double functional_V_full(const Kernel2D& Q, const LyapunovConstants& c, const Field& M, double eta,
                                const Field& w)
{
    double cross = eta - integrate(Field(w.grid, M.v.cwiseProduct(w.v)));
    return functional_V(Q, c, w) + cross * cross;
}

// Generic per-step check of (v[k+1] - v[k]) / dt <= bound(k) + slack(k).
inline DissipationReport check_steps(const std::vector<double>& t, const std::vector<double>& v,
                                     const std::function<double(std::size_t)>& bound,
                                     const std::function<double(std::size_t)>& slack)
{
    if (t.size() < 2 || v.size() != t.size())
        throw InsufficientDataError("dissipation check needs at least two records");
    DissipationReport rep;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        double dt = t[k + 1] - t[k];
        double lhs = (v[k + 1] - v[k]) / dt;
        double b = bound(k), s = slack(k);
        double margin = lhs - b - s;
        ++rep.steps_checked;
        if (margin > 0.0)
            ++rep.violations;
        else
            rep.slack_used = std::max(rep.slack_used, std::max(0.0, lhs - b));
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_time = t[k];
        }
    }
    return rep;
}

// dV/dt <= -alpha E + sigma1 |d1|^2 + sigma2 d2^2 + slack_frac * alpha * E along recorded snapshots
inline DissipationReport check_dissipation(const TimeSeries& ts, const Kernel2D& Q, const LyapunovConstants& c,
                                           const InputSignals& in, double slack_frac)
{
    if (!ts.has_snapshots())
        throw InsufficientDataError("dissipation check needs one snapshot per record");
    auto t = ts.column("t");
    std::vector<double> V(t.size()), E(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        Field w(Q.grid, ts.snapshots[k]);
        E[k] = energy(w);
        V[k] = functional_V(Q, c, w);
    }
    auto Emid = [&](std::size_t k) { return 0.5 * (E[k] + E[k + 1]); };
    auto bound = [&](std::size_t k) {
        double tm = 0.5 * (t[k] + t[k + 1]);
        double d1 = in.has_d1() ? energy(Field(Q.grid, in.d1(tm))) : 0.0;
        double d2 = in.slope(tm);
        return -c.alpha * Emid(k) + c.sigma1 * d1 + c.sigma2 * d2 * d2;
    };
    auto slack = [&](std::size_t k) { return slack_frac * c.alpha * Emid(k); };
    return check_steps(t, V, bound, slack);
}

// dq/dt <= -rate q + slack_frac * rate * q  (q evaluated at the step midpoint)
inline DissipationReport check_rate(const std::vector<double>& t, const std::vector<double>& q, double rate,
                                    double slack_frac)
{
    auto mid = [&](std::size_t k) { return 0.5 * (q[k] + q[k + 1]); };
    return check_steps(
        t, q, [&](std::size_t k) { return -rate * mid(k); },
        [&](std::size_t k) { return slack_frac * rate * mid(k); });
}

// v[k+1] <= v[k] + slack_rel * v[k]
inline DissipationReport check_monotone(const std::vector<double>& t, const std::vector<double>& v,
                                        double slack_rel)
{
    return check_steps(
        t, v, [](std::size_t) { return 0.0; },
        [&](std::size_t k) { return slack_rel * std::abs(v[k]) / (t[k + 1] - t[k]); });
}

} // namespace kdvf
