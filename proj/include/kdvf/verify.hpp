#pragma once
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "harness.hpp"
#include "observer.hpp"

namespace kdvf {

struct SuiteResult {
    std::string name;
    bool pass = true;
    std::vector<std::string> lines;

    void item(const std::string& what, bool ok, const std::string& margin)
    {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "PASS " : "FAIL ") + what + " " + margin);
    }
};

namespace verify_detail {

inline Design design_for(double lambda, const Grid& g)
{
    auto [P, Q] = obtain_kernels(lambda, g, cache_dir_from_env());
    return make_design(lambda, std::move(P), std::move(Q));
}

inline Field bump(const Grid& g, double norm)
{
    Field f = Field::sample(g, [&](double x) { return std::pow(std::sin(M_PI * x / g.L), 2); });
    f.v *= norm / l2_norm(f);
    return f;
}

inline Field sine_input(const Grid& g, double amp)
{
    return Field::sample(g, [&](double x) { return amp * std::sin(M_PI * x / g.L); });
}

inline std::string kv(const std::string& k, double v) { return k + "=" + fmt17(v); }

} // namespace verify_detail

inline SuiteResult suite_energy_law()
{
    using namespace verify_detail;
    SuiteResult r{"energy-law"};
    auto run = [](int n, double dt, double T) {
        Grid g = make_grid(1.5, n);
        return energy_law_residuals(bump(g, 0.5), KdvParams{g, dt, 0.5, false}, std::lround(T / dt));
    };
    const double T = 0.1;
    auto r1 = run(200, 1e-4, T);
    long ok = std::count_if(r1.begin(), r1.end(), [](double v) { return v <= 1e-3; });
    double frac = double(ok) / double(r1.size());
    r.item("per-step residual <= 1e-3 at >= 99% of steps (n=200)", frac >= 0.99,
           kv("fraction", frac) + " " + kv("max", *std::max_element(r1.begin(), r1.end())));
    auto r2 = run(400, 2.5e-5, T);
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    double ratio = mean(r1) / mean(r2);
    r.item("mean residual ratio n=200 -> 400 with dt ~ h^2 is >= 3", ratio >= 3.0, kv("ratio", ratio));
    return r;
}

inline SuiteResult suite_m_profile()
{
    SuiteResult r{"m-profile"};
    for (double L : {1.5, 3.0, 5.0}) {
        auto c = m_profile_certificate(make_grid(L, 150));
        double worst = std::max({c.M0, c.ML, c.dM0, c.ode});
        r.item("closed-form conditions at L=" + fmt17(L), worst <= 1e-12, verify_detail::kv("worst", worst));
    }
    return r;
}

inline SuiteResult suite_sylvester()
{
    SuiteResult r{"sylvester"};
    const double L = 1.5;
    Grid g = make_grid(L, 150);
    Field M = M_profile(g);
    const double tol = 1e-5 * (1.0 + L * L);
    auto check = [&](const std::string& name, auto f) {
        double res = sylvester_residual(M, Field::sample(g, f), 0.0);
        r.item("w=" + name, std::abs(res) < tol, verify_detail::kv("residual", res) + " " + verify_detail::kv("tol", tol));
    };
    check("x^2(L-x)^2", [&](double x) { return x * x * (L - x) * (L - x); });
    check("x(L-x)^2", [&](double x) { return x * (L - x) * (L - x); });
    check("0", [](double) { return 0.0; });
    return r;
}

inline SuiteResult suite_kernel_residuals()
{
    using namespace verify_detail;
    SuiteResult r{"kernel-residuals"};
    Grid g = make_grid(1.5, 100);
    Design d = design_for(1.0, g);
    r.item("P interior residual < 1e-2", d.repP.interior_residual < 1e-2, kv("residual", d.repP.interior_residual));
    r.item("Q interior residual < 1e-2", d.repQ.interior_residual < 1e-2, kv("residual", d.repQ.interior_residual));
    r.item("P boundary rows", d.repP.constraint_residual < 1e-10, kv("violation", d.repP.constraint_residual));
    r.item("Q boundary rows", d.repQ.constraint_residual < 1e-10, kv("violation", d.repQ.constraint_residual));
    Field w = Field::sample(g, [&](double x) { return std::sin(M_PI * x / g.L) + 0.3 * std::sin(3 * M_PI * x / g.L); });
    double rt = l2_norm(apply_Pi_bar(d.P, apply_Pi_bar_inv(d.Q, w)) - w) / l2_norm(w);
    r.item("round trip < 2%", rt < 0.02, kv("relative_error", rt));
    double cr = compatibility_residual(d.p, d.Q);
    r.item("compatibility < 5%", cr < 0.05, kv("residual", cr));
    r.lines.push_back("INFO " + kv("P.diag_consistency", d.repP.diag_consistency));
    return r;
}

inline DecayFit observer_rate(double lambda, const Grid& g, double T, double dt)
{
    Design d = verify_detail::design_for(lambda, g);
    Field e0 = verify_detail::bump(g, 1.0);
    auto ts = simulate_error_system(e0, KdvParams{g, dt, 1.0, false}, d.p, InputSignals{}, T, &d.Q, 10);
    return decay_fit(ts, "U", 0.0, T);
}

inline SuiteResult suite_observer_decay()
{
    using namespace verify_detail;
    SuiteResult r{"observer-decay"};
    Grid g = make_grid(1.5, 150);
    const double T = 2.0, dt = 1e-3;
    DecayFit f1 = observer_rate(1.0, g, T, dt);
    r.item("U rate at lambda=1 in [0.7, 1.3]", f1.rate >= 0.7 && f1.rate <= 1.3, kv("rate", f1.rate));
    r.item("r^2 > 0.95", f1.r_squared > 0.95, kv("r_squared", f1.r_squared));
    DecayFit fa = observer_rate(0.5, g, T, dt), fb = observer_rate(2.0, g, T, dt);
    r.item("rate(lambda=2) > rate(lambda=0.5)", fb.rate > fa.rate,
           kv("rate_2", fb.rate) + " " + kv("rate_0.5", fa.rate));
    return r;
}

inline SuiteResult suite_iss_monitor()
{
    using namespace verify_detail;
    SuiteResult r{"iss-monitor"};
    Grid g = make_grid(1.5, 150);
    Design d = design_for(1.0, g);
    Field d1 = sine_input(g, 1.0);
    d1.v *= 0.05 / l2_norm(d1);
    const Vec d1v = d1.v;
    InputSignals in;
    in.d1 = [d1v](double) { return d1v; };
    in.d2 = [](double) { return 0.01; };
    KdvParams p{g, 1e-3, 1.0, false};
    auto ts = simulate(bump(g, 0.1), p, in, 20.0, 1, true);
    auto rep = check_dissipation(ts, d.Q, d.consts, in, 0.05);
    r.item("dissipation at >= 99% of steps", rep.pass_fraction() >= 0.99,
           kv("pass_fraction", rep.pass_fraction()) + " " + kv("worst_margin", rep.worst_margin));
    auto E = ts.column("E");
    double emax = *std::max_element(E.begin(), E.end());
    r.item("state bounded over T=20", !ts.blew_up && std::isfinite(emax), kv("sup_norm", std::sqrt(emax)));
    return r;
}

inline SuiteResult suite_regulation(bool nonlinear)
{
    using namespace verify_detail;
    SuiteResult r{nonlinear ? "regulation-nonlinear" : "regulation-linear"};
    Grid g = make_grid(1.5, 150);
    Design des = design_for(1.0, g);
    GainMode mode = nonlinear ? GainMode::nonlinear : GainMode::linear;
    double kb = admissible_gain(des.consts, des.M, mode);
    double k = 0.5 * kb;
    Field d = sine_input(g, 0.05);
    if (nonlinear)
        d.v *= 0.02 / l2_norm(d);
    double rr = nonlinear ? 0.01 : 0.05;
    EquilibriumResult eq = nonlinear ? nonlinear_equilibrium(d, rr, k, g) : linear_equilibrium(d, rr, k, g);
    ClosedLoopConfig cfg;
    cfg.params = KdvParams{g, 1e-3, 1.0, nonlinear};
    cfg.k = k;
    cfg.k_bound = kb;
    cfg.r = rr;
    cfg.d1 = d;
    cfg.w0 = nonlinear ? bump(g, 0.05) : Field(g);
    cfg.T = nonlinear ? 60.0 : 40.0;
    cfg.record_every = 10;
    auto run = closed_loop_simulate(cfg, des, eq);
    r.lines.push_back("INFO " + kv("k", k) + " " + kv("k_bound", kb));
    if (run.series.blew_up) {
        r.item("no blow-up", false, kv("blowup_time", run.series.blowup_time));
        return r;
    }
    double fe = std::abs(run.series.column("e").back());
    double tol = nonlinear ? 5e-3 : 1e-3;
    r.item("|y(T) - r| < " + fmt17(tol), fe < tol, kv("final_abs_e", fe));
    if (!nonlinear) {
        auto rep = regulation_diagnostics(run, k);
        bool fit_ok = rep.x_fit && rep.x_fit->rate > 0.0 && rep.x_fit->r_squared > 0.9;
        r.item("X-distance decays (rate > 0, r^2 > 0.9)", fit_ok,
               rep.x_fit ? kv("rate", rep.x_fit->rate) + " " + kv("r_squared", rep.x_fit->r_squared) : "no fit");
        auto mono = check_monotone(run.series.column("t"), run.series.column("V_full"), 1e-10);
        r.item("V_full non-increasing", mono.violations == 0,
               "violations=" + std::to_string(mono.violations) + " " + kv("worst_margin", mono.worst_margin));
    } else {
        r.item("no blow-up to T=60", true, "");
        r.item("fixed point converged", eq.iterations <= 30 && eq.residual < 1e-7 && eq.contraction_est.value_or(0.0) < 1.0,
               "iterations=" + std::to_string(eq.iterations) + " " + kv("residual", eq.residual) + " " +
                   "contraction=" + fmt17(eq.contraction_est));
    }
    return r;
}

inline SuiteResult suite_equilibrium()
{
    using namespace verify_detail;
    SuiteResult r{"equilibrium"};
    Grid g = make_grid(1.5, 150);
    Field d = sine_input(g, 0.05);
    auto lin = linear_equilibrium(d, 0.05, 0.01, g);
    r.item("linear residual < 1e-8 (1 + |d|)", lin.residual < 1e-8 * (1.0 + l2_norm(d)), kv("residual", lin.residual));
    double slope_err = std::abs(boundary_slope(lin.w_inf, Side::left) - 0.05);
    r.item("w_inf'(0) = r", slope_err < 1e-8, kv("error", slope_err));
    Field dn = sine_input(g, 0.02);
    auto nl = nonlinear_equilibrium(dn, 0.01, 0.01, g);
    r.item("nonlinear fixed point", nl.iterations <= 30 && nl.residual < 1e-7 && nl.contraction_est.value_or(0.0) < 1.0,
           "iterations=" + std::to_string(nl.iterations) + " " + kv("residual", nl.residual) + " " +
               "contraction=" + fmt17(nl.contraction_est));
    bool raised = false;
    try {
        nonlinear_equilibrium(2e4 * dn, 0.01, 0.01, g);
    } catch (const NonContractionError&) {
        raised = true;
    }
    r.item("large data is refused", raised, "");
    return r;
}

inline const std::vector<std::pair<std::string, std::function<SuiteResult()>>>& suites()
{
    static const std::vector<std::pair<std::string, std::function<SuiteResult()>>> s = {
        {"energy-law", suite_energy_law},
        {"m-profile", suite_m_profile},
        {"sylvester", suite_sylvester},
        {"kernel-residuals", suite_kernel_residuals},
        {"observer-decay", suite_observer_decay},
        {"iss-monitor", suite_iss_monitor},
        {"regulation-linear", [] { return suite_regulation(false); }},
        {"regulation-nonlinear", [] { return suite_regulation(true); }},
        {"equilibrium", suite_equilibrium},
    };
    return s;
}

} // namespace kdvf
