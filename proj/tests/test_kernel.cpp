#include <gtest/gtest.h>

#include <sstream>

#include <kdvf/kdv.hpp>
#include <kdvf/kernel.hpp>

#include "oracles.hpp"

using namespace kdvf;

namespace {

struct Pair {
    Kernel2D P, Q;
    KernelSolveReport rp, rq;
};

const Pair& kernels()
{
    static Pair p = [] {
        Grid g = make_grid(1.5, 40);
        auto [P, rp] = solve_kernel_P(1.0, g);
        auto [Q, rq] = solve_kernel_Q(1.0, P);
        return Pair{P, Q, rp, rq};
    }();
    return p;
}

} // namespace

TEST(Kernel, EdgesVanishAndSlopeRowsHold)
{
    const auto& k = kernels();
    const int n = k.P.grid.n;
    for (int j = 0; j <= n; ++j) {
        EXPECT_NEAR(k.P.K(0, j), 0.0, 1e-14);
        EXPECT_NEAR(k.P.K(n, j), 0.0, 1e-14);
        EXPECT_NEAR(k.P.K(j, 0), 0.0, 1e-14);
        EXPECT_NEAR(k.P.K(j, n), 0.0, 1e-14);
    }
    EXPECT_LT(boundary_violation(KernelKind::P, k.P), 1e-10);
    EXPECT_LT(k.rp.constraint_residual, 1e-10);
}

TEST(Kernel, ResidualShrinksUnderRefinement)
{
    Grid g = make_grid(1.5, 20);
    auto coarse = solve_kernel_P(1.0, g).second.interior_residual;
    EXPECT_LT(kernels().rp.interior_residual, coarse);
}

TEST(Kernel, ReflectionSolvesMirrorProblem)
{
    Grid g = make_grid(1.5, 30);
    auto [P, rp] = solve_kernel_P(1.0, g);
    auto [G, rg] = solve_kernel_G(1.0, g);
    Kernel2D R = reflect(P);
    EXPECT_LT((R.K - G.K).cwiseAbs().maxCoeff() / G.K.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(kernel_residual(KernelKind::G, 1.0, R).interior_residual, rp.interior_residual, 1e-8);
}

TEST(Kernel, TransformsRoundTripAndCompatibility)
{
    const auto& k = kernels();
    const Grid& g = k.P.grid;
    Field w = Field::sample(g, [&](double x) { return std::sin(M_PI * x / g.L) + 0.2 * x * (g.L - x); });
    Field back = apply_Pi_bar(k.P, apply_Pi_bar_inv(k.Q, w));
    EXPECT_LT(l2_norm(back - w) / l2_norm(w), 1e-10);
    EXPECT_LT(compatibility_residual(gain_p(k.P), k.Q), 1e-8);
}

TEST(Kernel, ZeroKernelIsIdentity)
{
    Grid g = make_grid(1.0, 20);
    Kernel2D Z(g);
    Field w = Field::sample(g, [](double x) { return x * (1 - x); });
    EXPECT_EQ(l2_norm(apply_Pi_bar(Z, w) - w), 0.0);
    EXPECT_EQ(l2_norm(apply_Pi_bar_inv(Z, w) - w), 0.0);
    auto b = operator_bounds(Z);
    EXPECT_NEAR(b.c_under, 1.0, 1e-12);
    EXPECT_NEAR(b.c_bar, 1.0, 1e-12);
}

TEST(Kernel, OperatorBoundsSandwichDirectEvaluation)
{
    const auto& k = kernels();
    const Grid& g = k.P.grid;
    auto b = operator_bounds(k.Q);
    EXPECT_LE(b.c_under, b.c_bar);
    for (int m = 1; m <= 6; ++m) {
        Field w = Field::sample(g, [&](double x) { return std::sin(m * M_PI * x / g.L) + 0.1 * m * x; });
        double E = energy(w), U = energy(apply_Pi_bar_inv(k.Q, w));
        EXPECT_GE(U, b.c_under * E * (1 - 1e-12));
        EXPECT_LE(U, b.c_bar * E * (1 + 1e-12));
    }
}

TEST(Kernel, CsvRoundTripIsBitExact)
{
    const auto& k = kernels();
    std::stringstream ss;
    write_kernel_csv(ss, k.Q, "Q", 1.0);
    KernelHeader h;
    Kernel2D R = read_kernel_csv(ss, &h);
    EXPECT_EQ(h.name, "Q");
    EXPECT_EQ(h.n, 40);
    EXPECT_EQ(h.L, 1.5);
    EXPECT_TRUE(R.K == k.Q.K);
    std::stringstream bad("x,y\n");
    EXPECT_THROW(read_kernel_csv(bad), ConfigError);
}

TEST(Kernel, ParameterValidation)
{
    Grid g = make_grid(1.5, 20);
    EXPECT_THROW(solve_kernel_P(0.0, g), ConfigError);
    EXPECT_THROW(solve_kernel(KernelKind::Q, 1.0, g), PreconditionError);
}
