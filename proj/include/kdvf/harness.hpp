#pragma once
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "forwarding.hpp"
#include "scenario.hpp"

namespace kdvf {

enum ExitCode : int { exit_ok = 0, exit_checks_failed = 2, exit_blowup = 3, exit_config = 4, exit_critical = 5 };

struct CheckOutcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunOutcome {
    int exit_code = exit_ok;
    std::string csv_path, report_path;
    std::vector<CheckOutcome> checks;
    std::vector<std::string> report;
};

// Kernel pair (P, Q) for (lambda, grid), read from or written to `cache_dir` when it is non-empty.
inline std::pair<Kernel2D, Kernel2D> obtain_kernels(double lambda, const Grid& g, const std::string& cache_dir,
                                                     bool* from_cache = nullptr)
{
    namespace fs = std::filesystem;
    auto file = [&](const char* kind) {
        return fs::path(cache_dir) /
               (std::string(kind) + "_lambda" + fmt17(lambda) + "_L" + fmt17(g.L) + "_n" + std::to_string(g.n) + ".csv");
    };
    if (from_cache)
        *from_cache = false;
    if (!cache_dir.empty() && fs::exists(file("P")) && fs::exists(file("Q"))) {
        KernelHeader hp, hq;
        Kernel2D P = read_kernel_csv(file("P").string(), &hp);
        Kernel2D Q = read_kernel_csv(file("Q").string(), &hq);
        if (P.grid == g && Q.grid == g && hp.lambda == lambda && hq.lambda == lambda) {
            if (from_cache)
                *from_cache = true;
            return {std::move(P), std::move(Q)};
        }
    }
    auto [P, rp] = solve_kernel_P(lambda, g);
    auto [Q, rq] = solve_kernel_Q(lambda, P);
    if (!cache_dir.empty()) {
        fs::create_directories(cache_dir);
        write_kernel_csv(file("P").string(), P, "P", lambda);
        write_kernel_csv(file("Q").string(), Q, "Q", lambda);
    }
    return {std::move(P), std::move(Q)};
}

inline std::string cache_dir_from_env()
{
    const char* c = std::getenv("KDVF_CACHE_DIR");
    return c ? std::string(c) : std::string();
}

inline std::vector<std::string> scenario_echo(const Scenario& s)
{
    std::vector<std::string> m = {
        "scenario.name=" + s.name,
        "scenario.model=" + s.model,
        "scenario.seed=" + std::to_string(s.seed),
        "grid.L=" + fmt17(s.L),
        "grid.n=" + std::to_string(s.n),
        "time.dt=" + fmt17(s.dt),
        "time.T=" + fmt17(s.T),
        "time.theta=" + fmt17(s.theta),
        "time.record_every=" + std::to_string(s.record_every),
        "design.lambda=" + fmt17(s.lambda),
        "design.k=" + (s.k_auto ? std::string("auto") : fmt17(s.k)),
        "design.r=" + fmt17(s.r),
        "design.override_safety=" + std::string(s.override_safety ? "true" : "false"),
        "design.gain_safety=" + fmt17(s.gain_safety),
        "inputs.d1=" + s.d1_spec,
        "inputs.d2=" + s.d2_spec,
        "inputs.w0=" + s.w0_spec,
        "inputs.eta0=" + fmt17(s.eta0),
    };
    std::string checks;
    for (auto& c : s.checks)
        checks += (checks.empty() ? "" : ",") + c;
    m.push_back("checks.list=" + checks);
    m.push_back("checks.e_tol=" + fmt17(s.e_tol));
    m.push_back("checks.x_fraction=" + fmt17(s.x_fraction));
    return m;
}

inline std::vector<std::string> constants_echo(const LyapunovConstants& c)
{
    return {"const.c_under=" + fmt17(c.c_under), "const.c_bar=" + fmt17(c.c_bar),   "const.rho1=" + fmt17(c.rho1),
            "const.rho2=" + fmt17(c.rho2),       "const.p_bar=" + fmt17(c.p_bar),   "const.alpha=" + fmt17(c.alpha),
            "const.sigma1=" + fmt17(c.sigma1),   "const.sigma2=" + fmt17(c.sigma2), "const.k0_star=" + fmt17(c.k0_star),
            "const.M_norm=" + fmt17(c.M_norm)};
}

inline std::vector<std::string> kernel_echo(const Design& d)
{
    return {"kernel.P.interior_residual=" + fmt17(d.repP.interior_residual),
            "kernel.P.diag_consistency=" + fmt17(d.repP.diag_consistency),
            "kernel.P.constraint_residual=" + fmt17(d.repP.constraint_residual),
            "kernel.Q.interior_residual=" + fmt17(d.repQ.interior_residual),
            "kernel.Q.diag_consistency=" + fmt17(d.repQ.diag_consistency),
            "kernel.Q.constraint_residual=" + fmt17(d.repQ.constraint_residual),
            "kernel.compatibility_residual=" + fmt17(compatibility_residual(d.p, d.Q))};
}

namespace detail {

inline void write_report(const std::string& path, const std::vector<std::string>& lines)
{
    std::ofstream f(path);
    if (!f)
        throw ConfigError("cannot write " + path);
    for (auto& l : lines)
        f << l << '\n';
}

} // namespace detail

// Executes a parsed scenario, writing <name>.csv and <name>.report.txt into out_dir.
inline RunOutcome run_scenario(const Scenario& s, const std::string& out_dir, std::ostream& log = std::cerr)
{
    namespace fs = std::filesystem;
    RunOutcome out;
    fs::create_directories(out_dir);
    out.csv_path = (fs::path(out_dir) / (s.name + ".csv")).string();
    out.report_path = (fs::path(out_dir) / (s.name + ".report.txt")).string();
    auto& rep = out.report;
    rep.push_back("[scenario]");
    for (auto& m : scenario_echo(s))
        rep.push_back(m);

    auto finish = [&](int code, const std::string& status) {
        out.exit_code = code;
        rep.push_back("");
        rep.push_back("[result]");
        rep.push_back("status=" + status);
        rep.push_back("exit_code=" + std::to_string(code));
        detail::write_report(out.report_path, rep);
        return out;
    };

    try {
        Grid g = make_grid(s.L, s.n);
        if (!s.override_safety)
            if (auto wit = is_critical_length(s.L)) {
                rep.push_back("");
                rep.push_back("[refused]");
                rep.push_back("critical_length=true");
                rep.push_back("witness_k=" + std::to_string(wit->k));
                rep.push_back("witness_l=" + std::to_string(wit->l));
                rep.push_back("witness_value=" + fmt17(critical_value(wit->k, wit->l)));
                log << "refused: L = " << fmt17(s.L) << " is critical with witness (k, l) = (" << wit->k << ", "
                    << wit->l << ")\n";
                return finish(exit_critical, "refused_critical_length");
            }

        Field d1 = make_field(s.d1_spec, g, false, s.seed, s.base_dir);
        Field w0 = make_field(s.w0_spec, g, true, s.seed, s.base_dir);

        bool cached = false;
        auto [P, Q] = obtain_kernels(s.lambda, g, cache_dir_from_env(), &cached);
        log << "kernels " << (cached ? "loaded from cache" : "solved") << "\n";
        if (s.export_kernels) {
            fs::path kd = fs::path(out_dir) / (s.name + ".kernels");
            fs::create_directories(kd);
            write_kernel_csv((kd / "P.csv").string(), P, "P", s.lambda);
            write_kernel_csv((kd / "Q.csv").string(), Q, "Q", s.lambda);
        }
        Design des = make_design(s.lambda, std::move(P), std::move(Q));

        GainMode mode = s.nonlinear() ? GainMode::nonlinear : GainMode::linear;
        double k_bound = admissible_gain(des.consts, des.M, mode, s.gain_safety);
        double k = s.k_auto ? 0.5 * k_bound : s.k;

        EquilibriumResult eq = s.nonlinear() ? nonlinear_equilibrium(d1, s.r, k, g) : linear_equilibrium(d1, s.r, k, g);

        ClosedLoopConfig cfg;
        cfg.params = KdvParams{g, s.dt, s.theta, s.nonlinear()};
        check_params(cfg.params);
        cfg.k = k;
        cfg.r = s.r;
        cfg.eta0 = s.eta0;
        cfg.d1 = d1;
        cfg.w0 = w0;
        cfg.T = s.T;
        cfg.record_every = s.record_every;
        cfg.override_safety = s.override_safety;
        cfg.k_bound = k_bound;
        ClosedLoopRun run = closed_loop_simulate(cfg, des, eq);
        TimeSeries& ts = run.series;

        std::vector<std::string> design_lines = constants_echo(des.consts);
        design_lines.push_back("design.k_bound=" + fmt17(k_bound));
        design_lines.push_back("design.k_used=" + fmt17(k));
        design_lines.push_back("equilibrium.eta_inf=" + fmt17(eq.eta_inf));
        design_lines.push_back("equilibrium.u_inf=" + fmt17(eq.u_inf));
        design_lines.push_back("equilibrium.residual=" + fmt17(eq.residual));
        design_lines.push_back("equilibrium.iterations=" + std::to_string(eq.iterations));
        design_lines.push_back("equilibrium.contraction_est=" + fmt17(eq.contraction_est));
        for (auto& m : kernel_echo(des))
            design_lines.push_back(m);

        rep.push_back("");
        rep.push_back("[design]");
        for (auto& m : design_lines)
            rep.push_back(m);
        if (run.guard_violation_time >= 0.0)
            rep.push_back("warning.dt_guard_first_violation=" + fmt17(run.guard_violation_time));

        ts.meta = scenario_echo(s);
        for (auto& m : design_lines)
            ts.meta.push_back(m);

        if (ts.blew_up) {
            ts.meta.push_back("blowup_time=" + fmt17(ts.blowup_time));
            write_csv(out.csv_path, ts);
            rep.push_back("blowup_time=" + fmt17(ts.blowup_time));
            log << "blow-up at t = " << fmt17(ts.blowup_time) << "\n";
            return finish(exit_blowup, "blowup");
        }

        auto t = ts.column("t");
        auto e = ts.column("e");
        auto xd = ts.column("x_distance");
        auto vf = ts.column("V_full");
        bool all_pass = true;
        for (auto& c : s.checks) {
            CheckOutcome co{c, false, ""};
            if (c == "regulation") {
                double fe = std::abs(e.back());
                co.pass = fe < s.e_tol;
                co.detail = "final_abs_e=" + fmt17(fe) + " tol=" + fmt17(s.e_tol);
            } else if (c == "dissipation") {
                auto dr = check_monotone(t, vf, 1e-10);
                co.pass = dr.violations == 0;
                co.detail = "V_full_steps=" + std::to_string(dr.steps_checked) +
                            " violations=" + std::to_string(dr.violations) + " worst_margin=" + fmt17(dr.worst_margin);
            } else if (c == "equilibrium") {
                double x0 = xd.front(), x1 = xd.back();
                bool shrink = x0 == 0.0 ? x1 == 0.0 : x1 <= s.x_fraction * x0;
                co.detail = "x_distance_initial=" + fmt17(x0) + " x_distance_final=" + fmt17(x1);
                auto rr = regulation_diagnostics(run, k);
                if (rr.x_fit) {
                    co.detail += " fitted_rate=" + fmt17(rr.x_fit->rate) + " r_squared=" + fmt17(rr.x_fit->r_squared);
                    shrink = shrink && rr.x_fit->rate > 0.0 && rr.x_fit->r_squared > 0.9;
                }
                co.pass = shrink;
            } else if (c == "bounded") {
                double emax = 0.0;
                for (double v : ts.column("E"))
                    emax = std::max(emax, v);
                co.pass = std::isfinite(emax);
                co.detail = "sup_E=" + fmt17(emax);
            }
            all_pass = all_pass && co.pass;
            out.checks.push_back(co);
        }

        rep.push_back("");
        rep.push_back("[checks]");
        for (auto& c : out.checks)
            rep.push_back(c.name + "=" + (c.pass ? "PASS" : "FAIL") + " " + c.detail);
        rep.push_back("final_e=" + fmt17(e.back()));
        rep.push_back("final_x_distance=" + fmt17(xd.back()));

        write_csv(out.csv_path, ts);
        return finish(all_pass ? exit_ok : exit_checks_failed, all_pass ? "pass" : "checks_failed");
    } catch (const CriticalLengthError& e) {
        rep.push_back("error=" + std::string(e.what()));
        rep.push_back("witness_k=" + std::to_string(e.k));
        rep.push_back("witness_l=" + std::to_string(e.l));
        log << "refused: " << e.what() << "\n";
        return finish(exit_critical, "refused_critical_length");
    } catch (const BlowUpError& e) {
        rep.push_back("error=" + std::string(e.what()));
        log << "blow-up: " << e.what() << "\n";
        return finish(exit_blowup, "blowup");
    } catch (const Error& e) {
        rep.push_back("error=" + std::string(e.what()));
        log << "error: " << e.what() << "\n";
        return finish(exit_config, "error");
    }
}

} // namespace kdvf
