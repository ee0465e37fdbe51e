#include <gtest/gtest.h>

#include <kdvf/observer.hpp>

using namespace kdvf;

namespace {

Field bump(const Grid& g, double a)
{
    return Field::sample(g, [&](double x) { return a * std::pow(std::sin(M_PI * x / g.L), 2); });
}

const std::pair<Kernel2D, Kernel2D>& kernels()
{
    static auto k = [] {
        Grid g = make_grid(1.5, 40);
        auto P = solve_kernel_P(1.0, g).first;
        auto Q = solve_kernel_Q(1.0, P).first;
        return std::make_pair(P, Q);
    }();
    return k;
}

} // namespace

TEST(DecayFit, ExactExponential)
{
    std::vector<double> t, q;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.01 * i);
        q.push_back(std::exp(-2.0 * t.back()));
    }
    auto f = fit_exponential(t, q);
    EXPECT_NEAR(f.rate, 2.0, 1e-6);
    EXPECT_GT(f.r_squared, 0.999999);
}

TEST(DecayFit, PerturbedExponential)
{
    std::vector<double> t, q;
    for (int i = 0; i <= 1000; ++i) {
        t.push_back(0.005 * i);
        q.push_back(std::exp(-t.back()) * (1 + 0.01 * std::sin(50 * t.back())));
    }
    EXPECT_NEAR(fit_exponential(t, q).rate, 1.0, 0.02);
}

TEST(DecayFit, ShrinksToPositivePrefixAndRejectsShortWindows)
{
    std::vector<double> t, q;
    for (int i = 0; i < 30; ++i) {
        t.push_back(i);
        q.push_back(i < 20 ? std::exp(-0.5 * i) : 0.0);
    }
    auto f = fit_exponential(t, q);
    EXPECT_EQ(f.samples, 20);
    EXPECT_NEAR(f.rate, 0.5, 1e-9);
    std::vector<double> s(5, 1.0);
    EXPECT_THROW(fit_exponential(s, s), InsufficientDataError);
}

TEST(Observer, ZeroErrorInvariance)
{
    const auto& [P, Q] = kernels();
    const Grid& g = P.grid;
    Field p = gain_p(P);
    KdvParams prm{g, 1e-3, 1.0, false};
    LinearStepOperator op(prm);
    KdvState plant{0.0, bump(g, 0.3)};
    ObserverState obs{0.0, plant.w};
    for (int k = 0; k < 1000; ++k) {
        double y = boundary_slope(plant.w, Side::left);
        plant = step(plant, prm, InputSignals{}, op);
        obs = observer_step(obs, y, prm, op, p);
    }
    EXPECT_LT(l2_norm(obs.w_hat - plant.w), 1e-6);
}

TEST(Observer, ZeroGainIsOpenLoopCopy)
{
    Grid g = make_grid(1.5, 40);
    KdvParams prm{g, 1e-3, 1.0, false};
    LinearStepOperator op(prm);
    KdvState plant{0.0, bump(g, 0.3)};
    ObserverState obs{0.0, bump(g, 0.1)};
    KdvState copy{0.0, obs.w_hat};
    for (int k = 0; k < 200; ++k) {
        double y = boundary_slope(plant.w, Side::left);
        plant = step(plant, prm, InputSignals{}, op);
        obs = observer_step(obs, y, prm, op, Field(g));
        copy = step(copy, prm, InputSignals{}, op);
    }
    EXPECT_EQ(l2_norm(obs.w_hat - copy.w), 0.0);
}

TEST(Observer, RejectsNonFiniteOutput)
{
    Grid g = make_grid(1.5, 20);
    KdvParams prm{g, 1e-3, 1.0, false};
    LinearStepOperator op(prm);
    EXPECT_THROW(observer_step(ObserverState{0.0, Field(g)}, NAN, prm, op, Field(g)), PreconditionError);
}

TEST(ErrorSystem, ZeroTrajectoryAndDecay)
{
    const auto& [P, Q] = kernels();
    const Grid& g = P.grid;
    KdvParams prm{g, 1e-3, 1.0, false};
    auto zero = simulate_error_system(Field(g), prm, gain_p(P), InputSignals{}, 0.5, &Q, 10);
    for (auto& r : zero.rows)
        EXPECT_EQ(r[1], 0.0);
    auto ts = simulate_error_system(bump(g, 1.0), prm, gain_p(P), InputSignals{}, 1.0, &Q, 10);
    auto fit = decay_fit(ts, "U", 0.0, 1.0);
    EXPECT_GT(fit.rate, 0.0);
    EXPECT_GT(fit.r_squared, 0.9);
}

TEST(ErrorSystem, ConstantSlopeInputStaysBounded)
{
    const auto& [P, Q] = kernels();
    const Grid& g = P.grid;
    InputSignals in;
    in.d2 = [](double) { return 0.01; };
    auto ts = simulate_error_system(Field(g), KdvParams{g, 1e-2, 1.0, false}, gain_p(P), in, 20.0, &Q, 10);
    auto nrm = ts.column("norm");
    double late = *std::max_element(nrm.begin() + nrm.size() / 2, nrm.end());
    EXPECT_FALSE(ts.blew_up);
    EXPECT_LT(late, 0.1);
}
