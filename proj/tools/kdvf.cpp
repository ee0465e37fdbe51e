#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <kdvf/harness.hpp>
#include <kdvf/verify.hpp>

using namespace kdvf;

namespace {

int cmd_run(const std::string& path, const std::string& out_dir)
{
    Scenario s;
    try {
        s = load_scenario(path);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return exit_config;
    }
    RunOutcome out = run_scenario(s, out_dir.empty() ? "." : out_dir);
    for (auto& c : out.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
    std::cout << "report " << out.report_path << "\nexit " << out.exit_code << "\n";
    return out.exit_code;
}

int cmd_verify(const std::string& which, const std::string& out_dir)
{
    std::vector<std::pair<std::string, std::function<SuiteResult()>>> todo;
    for (auto& s : suites())
        if (which == "all" || which == s.first)
            todo.push_back(s);
    if (todo.empty()) {
        std::cerr << "unknown suite '" << which << "'; available:";
        for (auto& s : suites())
            std::cerr << " " << s.first;
        std::cerr << " all\n";
        return exit_config;
    }
    bool all = true;
    for (auto& [name, fn] : todo) {
        SuiteResult r;
        try {
            r = fn();
        } catch (const Error& e) {
            r.name = name;
            r.item("suite completed", false, e.what());
        }
        all = all && r.pass;
        std::cout << "[" << r.name << "] " << (r.pass ? "PASS" : "FAIL") << "\n";
        for (auto& l : r.lines)
            std::cout << "  " << l << "\n";
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream f(std::filesystem::path(out_dir) / ("verify-" + r.name + ".report.txt"));
            f << r.name << " " << (r.pass ? "PASS" : "FAIL") << "\n";
            for (auto& l : r.lines)
                f << l << "\n";
        }
    }
    return all ? exit_ok : exit_checks_failed;
}

int cmd_kernel(double lambda, double L, int n, const std::string& out_dir)
{
    Grid g = make_grid(L, n);
    if (auto wit = is_critical_length(L))
        std::cerr << "warning: L is critical, witness (" << wit->k << ", " << wit->l << ")\n";
    auto [P, Q] = obtain_kernels(lambda, g, cache_dir_from_env());
    std::filesystem::create_directories(out_dir);
    namespace fs = std::filesystem;
    write_kernel_csv((fs::path(out_dir) / "P.csv").string(), P, "P", lambda);
    write_kernel_csv((fs::path(out_dir) / "Q.csv").string(), Q, "Q", lambda);
    Design d = make_design(lambda, std::move(P), std::move(Q));
    std::vector<std::string> lines = {"lambda=" + fmt17(lambda), "L=" + fmt17(L), "n=" + std::to_string(n)};
    for (auto& m : kernel_echo(d))
        lines.push_back(m);
    for (auto& m : constants_echo(d.consts))
        lines.push_back(m);
    std::ofstream f(fs::path(out_dir) / "kernel.report.txt");
    for (auto& l : lines) {
        f << l << "\n";
        std::cout << l << "\n";
    }
    return exit_ok;
}

int cmd_equilibrium(const std::string& model, double L, int n, double r, double k, const std::string& d_spec,
                    const std::string& out)
{
    if (model != "linear" && model != "nonlinear")
        throw ConfigError("model must be linear or nonlinear");
    Grid g = make_grid(L, n);
    Field d = make_field(d_spec, g, false, 1);
    EquilibriumResult eq = model == "linear" ? linear_equilibrium(d, r, k, g) : nonlinear_equilibrium(d, r, k, g);
    std::cout << "eta_inf=" << fmt17(eq.eta_inf) << "\nu_inf=" << fmt17(eq.u_inf)
              << "\nresidual=" << fmt17(eq.residual) << "\niterations=" << eq.iterations
              << "\ncontraction_est=" << fmt17(eq.contraction_est) << "\n";
    if (!out.empty()) {
        TimeSeries ts;
        ts.meta = {"model=" + model, "L=" + fmt17(L), "n=" + std::to_string(n), "r=" + fmt17(r), "k=" + fmt17(k),
                   "d=" + d_spec, "eta_inf=" + fmt17(eq.eta_inf), "residual=" + fmt17(eq.residual)};
        ts.columns = {"x", "w_inf"};
        for (int i = 0; i <= n; ++i)
            ts.rows.push_back({g.x(i), eq.w_inf.v[i]});
        write_csv(out, ts);
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"KdV boundary output regulation toolkit"};
    app.require_subcommand(1);

    std::string scn, out_dir;
    auto* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("scenario", scn, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory (default: current directory)");

    std::string suite, vout;
    auto* ver = app.add_subcommand("verify", "run named property suites");
    ver->add_option("suite", suite, "suite name or all")->required();
    ver->add_option("--out", vout, "directory for per-suite report files");

    double lambda = 1.0, L = 1.5;
    int n = 100;
    std::string kout;
    auto* ker = app.add_subcommand("kernel", "solve and export the kernels P and Q");
    ker->add_option("--lambda", lambda)->required();
    ker->add_option("--L", L)->required();
    ker->add_option("--n", n)->required();
    ker->add_option("--out", kout)->required();

    std::string model = "linear", dspec = "zero", eout;
    double eL = 1.5, er = 0.0, ek = 0.01;
    int en = 150;
    auto* eqc = app.add_subcommand("equilibrium", "compute the closed-loop equilibrium");
    eqc->add_option("--model", model)->required();
    eqc->add_option("--L", eL);
    eqc->add_option("--n", en);
    eqc->add_option("--r", er);
    eqc->add_option("--k", ek);
    eqc->add_option("--d", dspec, "distributed input descriptor");
    eqc->add_option("--out", eout, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        if (*run)
            return cmd_run(scn, out_dir);
        if (*ver)
            return cmd_verify(suite, vout);
        if (*ker)
            return cmd_kernel(lambda, L, n, kout);
        if (*eqc)
            return cmd_equilibrium(model, eL, en, er, ek, dspec, eout);
    } catch (const CriticalLengthError& e) {
        std::cerr << e.what() << " (witness " << e.k << ", " << e.l << ")\n";
        return exit_critical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    }
    return exit_config;
}
