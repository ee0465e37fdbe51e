#include <gtest/gtest.h>

#include <kdvf/grid.hpp>
#include <kdvf/kdv.hpp>

#include "oracles.hpp"

using namespace kdvf;

TEST(Grid, SpacingAndNodes)
{
    Grid g = make_grid(1.5, 150);
    EXPECT_EQ(g.nodes(), 151);
    EXPECT_DOUBLE_EQ(g.h, 0.01);
    EXPECT_THROW(make_grid(-1.0, 50), ConfigError);
    EXPECT_THROW(make_grid(1.0, 3), ConfigError);
}

TEST(Grid, ThirdDerivativeExactOnCubics)
{
    Grid g = make_grid(1.5, 40);
    Field f = Field::sample(g, [](double x) { return x * x * x; });
    Field d = diff(f, 3);
    for (int i = 0; i <= g.n; ++i)
        EXPECT_NEAR(d[i], 6.0, 1e-6) << "node " << i;
}

TEST(Grid, FirstDerivativeSecondOrder)
{
    auto err = [](int n) {
        Grid g = make_grid(1.5, n);
        Field d = diff(Field::sample(g, [](double x) { return std::sin(2 * x); }), 1);
        double e = 0;
        for (int i = 0; i <= n; ++i)
            e = std::max(e, std::abs(d[i] - 2 * std::cos(2 * g.x(i))));
        return e;
    };
    EXPECT_GT(err(50) / err(100), 3.5);
}

TEST(Grid, QuadratureAndEnergy)
{
    Grid g = make_grid(1.5, 150);
    EXPECT_EQ(energy(Field(g)), 0.0);
    Field one(g, Vec::Ones(g.nodes()));
    EXPECT_NEAR(energy(one), 1.5, 1e-14);
    Field s = Field::sample(g, [&](double x) { return std::sin(2 * M_PI * x / 1.5); });
    EXPECT_NEAR(energy(s), 0.75, 1e-8);
    Grid odd = make_grid(1.5, 151);
    EXPECT_NEAR(integrate(Field(odd, Vec::Ones(odd.nodes()))), 1.5, 1e-14);
}

TEST(Grid, BoundarySlopes)
{
    Grid g = make_grid(2.0, 100);
    Field f = Field::sample(g, [](double x) { return x * x - 3 * x; });
    EXPECT_NEAR(boundary_slope(f, Side::left), -3.0, 1e-10);
    EXPECT_NEAR(boundary_slope(f, Side::right), 1.0, 1e-10);
}

TEST(CriticalLength, DetectsTwoPiWithWitness)
{
    auto w = is_critical_length(2 * M_PI);
    ASSERT_TRUE(w.has_value());
    EXPECT_EQ(w->k, 1);
    EXPECT_EQ(w->l, 1);
    EXPECT_FALSE(is_critical_length(1.5).has_value());
    double L21 = 2 * M_PI * std::sqrt(7.0 / 3.0);
    auto w2 = is_critical_length(L21);
    ASSERT_TRUE(w2.has_value());
    EXPECT_NEAR(critical_value(w2->k, w2->l), L21, 1e-12);
    EXPECT_FALSE(is_critical_length(2 * M_PI + 1e-6).has_value());
}

TEST(Field, ArithmeticAndGridMismatch)
{
    Grid g = make_grid(1.0, 20);
    Field a = Field::sample(g, [](double x) { return x; });
    Field b = 2.0 * a - a + a;
    EXPECT_DOUBLE_EQ(b[20], 2.0);
    EXPECT_THROW(Field(g, Vec::Zero(5)), PreconditionError);
}
