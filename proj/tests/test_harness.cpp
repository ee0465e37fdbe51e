#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <kdvf/harness.hpp>

using namespace kdvf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    fs::path d = fs::temp_directory_path() / ("kdvf_harness_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Scenario small(const std::string& name)
{
    std::istringstream is("[scenario]\nname = " + name +
                          "\n[grid]\nL = 1.5\nn = 40\n[time]\ndt = 1e-2\nT = 2\nrecord_every = 5\n"
                          "[design]\nr = 0.02\n[inputs]\nd1 = sine 0.02 1\nw0 = bump 0.05\n"
                          "[checks]\nlist = dissipation, bounded\n");
    return parse_scenario(is);
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string strip_wall_clock(const std::string& csv)
{
    std::istringstream is(csv);
    std::string line, out;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '#') {
            auto c = line.rfind(',');
            line = line.substr(0, c);
        }
        out += line + "\n";
    }
    return out;
}

std::ostringstream sink;

} // namespace

TEST(Harness, ZeroScenarioPassesWithZeroRows)
{
    auto dir = fresh_dir("zero");
    std::istringstream is("[scenario]\nname = z\n[grid]\nn = 30\n[time]\ndt = 0.05\nT = 1\nrecord_every = 1\n"
                          "[checks]\nlist = dissipation\n");
    auto out = run_scenario(parse_scenario(is), dir.string(), sink);
    EXPECT_EQ(out.exit_code, exit_ok);
    TimeSeries ts;
    std::istringstream csv(slurp(out.csv_path));
    std::string line;
    int rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 't')
            continue;
        ++rows;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        ASSERT_EQ(cells.size(), 10u);
        for (int c = 1; c <= 8; ++c)
            EXPECT_EQ(cells[c], "0");
    }
    EXPECT_EQ(rows, 21);
}

TEST(Harness, CriticalLengthExitAndWitness)
{
    auto dir = fresh_dir("crit");
    Scenario s = small("crit");
    s.L = 2 * M_PI;
    auto out = run_scenario(s, dir.string(), sink);
    EXPECT_EQ(out.exit_code, exit_critical);
    std::string rep = slurp(out.report_path);
    EXPECT_NE(rep.find("witness_k=1"), std::string::npos);
    EXPECT_NE(rep.find("witness_l=1"), std::string::npos);
}

TEST(Harness, GainAboveBoundIsConfigError)
{
    auto dir = fresh_dir("gain");
    Scenario s = small("gain");
    s.k_auto = false;
    s.k = 5.0;
    EXPECT_EQ(run_scenario(s, dir.string(), sink).exit_code, exit_config);
}

TEST(Harness, FailingCheckAndBlowUp)
{
    auto dir = fresh_dir("fail");
    Scenario s = small("fail");
    s.checks = {"regulation"};
    s.e_tol = 1e-12;
    EXPECT_EQ(run_scenario(s, dir.string(), sink).exit_code, exit_checks_failed);
    Scenario b = small("boom");
    b.model = "nonlinear";
    b.n = 100;
    b.dt = 0.05;
    b.w0_spec = "gaussian 0.75 0.1 400";
    b.d1_spec = "zero";
    b.r = 0.0;
    b.k_auto = false;
    b.k = 0.5;
    b.override_safety = true;
    auto out = run_scenario(b, dir.string(), sink);
    EXPECT_EQ(out.exit_code, exit_blowup);
    EXPECT_NE(slurp(out.report_path).find("status=blowup"), std::string::npos);
}

TEST(Harness, DeterministicAndCacheTransparent)
{
    auto cache = fresh_dir("cache");
    auto d1 = fresh_dir("run1"), d2 = fresh_dir("run2"), d3 = fresh_dir("run3");
    Scenario s = small("det");
    s.w0_spec = "random 0.05 4";
    unsetenv("KDVF_CACHE_DIR");
    auto a = run_scenario(s, d1.string(), sink);
    setenv("KDVF_CACHE_DIR", cache.c_str(), 1);
    auto b = run_scenario(s, d2.string(), sink);
    auto c = run_scenario(s, d3.string(), sink);
    unsetenv("KDVF_CACHE_DIR");
    EXPECT_TRUE(fs::exists(cache / "P_lambda1_L1.5_n40.csv"));
    EXPECT_EQ(a.exit_code, exit_ok);
    std::string ca = strip_wall_clock(slurp(a.csv_path));
    EXPECT_EQ(ca, strip_wall_clock(slurp(b.csv_path)));
    EXPECT_EQ(ca, strip_wall_clock(slurp(c.csv_path)));
    EXPECT_EQ(slurp(a.report_path), slurp(c.report_path));
}

TEST(Harness, KernelExport)
{
    auto dir = fresh_dir("export");
    Scenario s = small("exp");
    s.export_kernels = true;
    run_scenario(s, dir.string(), sink);
    KernelHeader h;
    Kernel2D Q = read_kernel_csv((dir / "exp.kernels" / "Q.csv").string(), &h);
    EXPECT_EQ(h.name, "Q");
    EXPECT_EQ(Q.grid.n, 40);
}
