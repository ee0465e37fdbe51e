#include <gtest/gtest.h>

#include <sstream>

#include <kdvf/kdv.hpp>

#include "oracles.hpp"

using namespace kdvf;

namespace {

std::vector<double> as_vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Field bump(const Grid& g, double a)
{
    return Field::sample(g, [&](double x) { return a * std::pow(std::sin(M_PI * x / g.L), 2); });
}

} // namespace

TEST(Kdv, ZeroStaysZero)
{
    Grid g = make_grid(1.5, 60);
    auto ts = simulate(Field(g), KdvParams{g, 1e-3, 1.0, true}, InputSignals{}, 0.5, 10);
    for (auto& r : ts.rows)
        for (std::size_t c = 1; c < r.size(); ++c)
            EXPECT_EQ(r[c], 0.0);
}

TEST(Kdv, CrankNicolsonEnergyIdentityAgainstOracle)
{
    Grid g = make_grid(1.5, 100);
    KdvParams p{g, 2e-4, 0.5, false};
    LinearStepOperator op(p);
    KdvState s{0.0, bump(g, 0.3)};
    for (int k = 0; k < 200; ++k) {
        KdvState nx = step(s, p, InputSignals{}, op);
        std::vector<double> mid(g.nodes());
        for (int i = 0; i <= g.n; ++i)
            mid[i] = 0.5 * (s.w[i] + nx.w[i]);
        double dE = (oracle::energy(as_vec(nx.w.v), g.h) - oracle::energy(as_vec(s.w.v), g.h)) / p.dt;
        double y = oracle::slope_left(mid, g.h);
        EXPECT_LT(std::abs(dE + y * y), 2e-3);
        s = nx;
    }
}

TEST(Kdv, EnergyDecaysForUnforcedBackwardEuler)
{
    Grid g = make_grid(1.5, 80);
    auto ts = simulate(bump(g, 0.5), KdvParams{g, 1e-3, 1.0, false}, InputSignals{}, 1.0, 1);
    auto E = ts.column("E");
    for (std::size_t k = 1; k < E.size(); ++k)
        EXPECT_LE(E[k], E[k - 1] * (1 + 1e-12));
}

TEST(Kdv, BoundaryRowsHeldAndSlopeInputEntersAtRight)
{
    Grid g = make_grid(1.5, 100);
    InputSignals in;
    in.d2 = [](double) { return 0.1; };
    auto ts = simulate(Field(g), KdvParams{g, 1e-3, 1.0, false}, in, 2.0, 100, true);
    Field w(g, ts.snapshots.back());
    EXPECT_EQ(w[0], 0.0);
    EXPECT_EQ(w[g.n], 0.0);
    EXPECT_GT(l2_norm(w), 1e-4);
    EXPECT_NEAR(ts.rows.back()[ts.col("wx_L")], 0.1, 5e-3);
}

TEST(Kdv, BlowUpReported)
{
    Grid g = make_grid(1.5, 100);
    Field w0 = Field::sample(g, [&](double x) { return 400 * std::exp(-50 * (x - 0.75) * (x - 0.75)); });
    w0.v[0] = w0.v[g.n] = 0.0;
    auto ts = simulate(w0, KdvParams{g, 0.05, 1.0, true}, InputSignals{}, 5.0);
    EXPECT_TRUE(ts.blew_up);
    EXPECT_GT(ts.blowup_time, 0.0);
}

TEST(Kdv, ParameterValidation)
{
    Grid g = make_grid(1.5, 40);
    EXPECT_THROW(LinearStepOperator(KdvParams{g, -1.0, 1.0, false}), ConfigError);
    EXPECT_THROW(LinearStepOperator(KdvParams{g, 1e-3, 0.2, false}), ConfigError);
    EXPECT_THROW(simulate(Field(g), KdvParams{g, 1e-3, 1.0, false}, InputSignals{}, -1.0), ConfigError);
}

TEST(Kdv, ConvectiveLimitShrinksWithAmplitude)
{
    Grid g = make_grid(1.5, 100);
    EXPECT_GT(convective_dt_limit(g, Vec::Zero(101)), convective_dt_limit(g, Vec::Constant(101, 3.0)));
}

TEST(TimeSeries, CsvFormat)
{
    TimeSeries ts;
    ts.meta = {"a=1"};
    ts.columns = {"t", "v"};
    ts.rows = {{0.0, 0.1}, {1.0, 1.0 / 3.0}};
    std::ostringstream os;
    write_csv(os, ts);
    EXPECT_EQ(os.str(), "# a=1\nt,v\n0,0.10000000000000001\n1,0.33333333333333331\n");
}
