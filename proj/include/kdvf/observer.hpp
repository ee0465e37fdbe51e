#pragma once
#include <cmath>
#include <vector>

#include "kdv.hpp"
#include "kernel.hpp"

namespace kdvf {

struct ObserverState {
    double t = 0.0;
    Field w_hat;
};

struct DecayFit {
    double rate = 0.0;
    double r_squared = 0.0;
    double t_start = 0.0, t_end = 0.0;
    int samples = 0;
};

// w_hat_t + w_hat_x + w_hat_xxx + p (y - w_hat_x(0)) = 0,  w_hat_x(L) = 0.
// `op` must be built from `params`; the injection is explicit.
inline ObserverState observer_step(const ObserverState& obs, double y, const KdvParams& params,
                                   const LinearStepOperator& op, const Field& p)
{
    if (!std::isfinite(y))
        throw PreconditionError("observer received a non-finite output");
    if (!(p.grid == params.grid))
        throw PreconditionError("gain and observer grids differ");
    Vec inj = -p.v * (y - boundary_slope(obs.w_hat, Side::left));
    KdvState s = step(KdvState{obs.t, obs.w_hat}, params, InputSignals{}, op, &inj);
    return {s.t, std::move(s.w)};
}

// Error dynamics  e_t + e_x + e_xxx - p e_x(0) = d1,  e_x(L) = d2.
// Columns t, norm, U (when Q is given, else 0), y.
inline TimeSeries simulate_error_system(const Field& e0, const KdvParams& params, const Field& p,
                                        const InputSignals& in, double T, const Kernel2D* Q = nullptr,
                                        int record_every = 1, bool snapshots = false)
{
    LinearStepOperator op(params);
    TimeSeries ts;
    ts.columns = {"t", "norm", "U", "y"};
    auto record = [&](const KdvState& s) {
        double U = Q ? energy(apply_Pi_bar_inv(*Q, s.w)) : 0.0;
        ts.rows.push_back({s.t, l2_norm(s.w), U, boundary_slope(s.w, Side::left)});
        if (snapshots)
            ts.snapshots.push_back(s.w.v);
    };
    KdvState s{0.0, e0};
    record(s);
    const long steps = std::lround(T / params.dt);
    for (long k = 1; k <= steps; ++k) {
        Vec inj = p.v * boundary_slope(s.w, Side::left);
        try {
            s = step(s, params, in, op, &inj);
        } catch (const BlowUpError& e) {
            ts.blew_up = true;
            ts.blowup_time = e.time;
            return ts;
        }
        if (k % record_every == 0 || k == steps)
            record(s);
    }
    return ts;
}

inline DecayFit fit_exponential(const std::vector<double>& t, const std::vector<double>& q)
{
    std::size_t cnt = std::min(t.size(), q.size());
    std::size_t used = 0;
    while (used < cnt && q[used] > 0.0 && std::isfinite(q[used]))
        ++used;
    if (used < 10)
        throw InsufficientDataError("decay fit needs at least 10 positive samples, got " + std::to_string(used));
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < used; ++i) {
        double y = std::log(q[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    const double N = static_cast<double>(used);
    double den = N * stt - st * st;
    if (den <= 0.0)
        throw InsufficientDataError("decay fit needs distinct sample times");
    double slope = (N * sty - st * sy) / den;
    double icpt = (sy - slope * st) / N;
    double ybar = sy / N, ssr = 0, sst = 0;
    for (std::size_t i = 0; i < used; ++i) {
        double y = std::log(q[i]);
        double f = icpt + slope * t[i];
        ssr += (y - f) * (y - f);
        sst += (y - ybar) * (y - ybar);
    }
    DecayFit fit;
    fit.rate = -slope;
    fit.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
    fit.t_start = t[0];
    fit.t_end = t[used - 1];
    fit.samples = static_cast<int>(used);
    return fit;
}

// Least-squares fit of log(quantity) against t over [t0, t1].
inline DecayFit decay_fit(const TimeSeries& ts, const std::string& quantity, double t0, double t1)
{
    auto tc = ts.column("t");
    auto qc = ts.column(quantity);
    std::vector<double> t, q;
    for (std::size_t i = 0; i < tc.size(); ++i)
        if (tc[i] >= t0 && tc[i] <= t1) {
            t.push_back(tc[i]);
            q.push_back(qc[i]);
        }
    return fit_exponential(t, q);
}

} // namespace kdvf
