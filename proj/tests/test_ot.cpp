#include <gtest/gtest.h>

#include <cmath>

#include "stochot/ot/exact.hpp"
#include "stochot/ot/sinkhorn.hpp"
#include "test_util.hpp"

using namespace stochot;

TEST(CostMatrix, PoweredDistances) {
    EXPECT_EQ(cost_matrix(std::vector<Point>{{0.0}}, std::vector<Point>{{0.0}}, 3.0)(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(cost_matrix(std::vector<Point>{{0, 0}}, std::vector<Point>{{1, 1}}, 2.0)(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(cost_matrix(std::vector<Point>{{0, 0}}, std::vector<Point>{{1, 1}}, 1.0)(0, 0), std::sqrt(2.0));
}

TEST(CostMatrix, Errors) {
    EXPECT_THROW(cost_matrix(std::vector<Point>{{0, 0}}, std::vector<Point>{{1}}, 1.0), InvalidArgument);
    EXPECT_THROW(cost_matrix(std::vector<Point>{{0}}, std::vector<Point>{{1}}, 0.5), InvalidArgument);
}

TEST(ExactOt, PointMasses) {
    auto plan = exact_ot(dirac({0.0, 0.0}), dirac({3.0, 4.0}), 1.5);
    ASSERT_EQ(plan.entries.size(), 1u);
    EXPECT_NEAR(plan.entries[0].mass, 1.0, 1e-15);
    EXPECT_NEAR(plan.cost_value, std::pow(5.0, 1.5), 1e-9);
}

TEST(ExactOt, MonotoneOnTheLine) {
    auto mu = empirical({{0.0}, {2.0}});
    auto nu = empirical({{1.0}, {3.0}});
    auto plan = exact_ot(mu, nu, 1.0);
    EXPECT_NEAR(plan.cost_value, 1.0, 1e-12);
    EXPECT_NEAR(wasserstein_p(mu, nu, 1.0), 1.0, 1e-12);
}

TEST(ExactOt, SelfCouplingIsFree) {
    Rng rng = make_rng(3);
    auto mu = test::random_measure(12, 3, rng, false);
    EXPECT_NEAR(exact_ot(mu, mu, 2.0).cost_value, 0.0, 1e-12);
}

TEST(ExactOt, SupportCap) {
    auto mu = empirical({{0.0}, {1.0}, {2.0}});
    EXPECT_THROW(exact_ot(mu, mu, 1.0, {.support_cap = 2}), InvalidArgument);
}

TEST(ExactOt, MatchesBruteForce) {
    Rng rng = make_rng(11);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + t % 7, d = 1 + t % 3;
        const double p = (t % 3 == 0) ? 1.0 : (t % 3 == 1 ? 1.5 : 2.0);
        auto mu = test::random_measure(n, d, rng, true);
        auto nu = test::random_measure(n, d, rng, true);
        auto ex = exact_ot(mu, nu, p);
        auto bf = brute_force_ot(mu, nu, p);
        ASSERT_NEAR(ex.cost_value, bf.cost_value, 1e-9) << "instance " << t;
        ASSERT_LE(ex.marginal_violation(), 1e-9);
    }
}

TEST(ExactOt, NonUniformMarginalsAndRectangular) {
    Rng rng = make_rng(5);
    for (int t = 0; t < 30; ++t) {
        auto mu = test::random_measure(3 + t % 9, 2, rng, false);
        auto nu = test::random_measure(2 + t % 13, 2, rng, false);
        auto plan = exact_ot(mu, nu, 2.0);
        EXPECT_LE(plan.marginal_violation(), 1e-9);
        EXPECT_NEAR(plan.total_mass(), 1.0, 1e-9);
        // every feasible product plan costs at least the optimum
        double prod = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            for (std::size_t j = 0; j < nu.size(); ++j)
                prod += mu.weight(i) * nu.weight(j) * powered_distance(mu.point(i), nu.point(j), 2.0);
        EXPECT_LE(plan.cost_value, prod + 1e-12);
    }
}

TEST(ExactOt, LargerInstanceAgreesWithOneDimensionalFormula) {
    Rng rng = make_rng(21);
    auto mu = test::random_measure(300, 1, rng, false);
    auto nu = test::random_measure(250, 1, rng, false);
    for (double p : {1.0, 2.0}) {
        const double exact = std::pow(exact_ot(mu, nu, p).cost_value, 1.0 / p);
        EXPECT_NEAR(exact, ot_1d(mu, nu, p).first, 1e-9);
    }
}

TEST(BruteForce, Preconditions) {
    auto u = empirical({{0.0}, {1.0}});
    auto v = make_discrete({{0.0}, {1.0}}, {1.0, 3.0});
    EXPECT_THROW(brute_force_ot(u, v, 1.0), InvalidArgument);
    std::vector<Point> nine;
    for (int i = 0; i < 9; ++i) nine.push_back({double(i)});
    EXPECT_THROW(brute_force_ot(empirical(nine), empirical(nine), 1.0), InvalidArgument);
}

TEST(BruteForce, TwoPointsTakesCheaperAssignment) {
    auto mu = empirical({{0.0, 0.0}, {1.0, 0.0}});
    auto nu = empirical({{0.9, 0.1}, {0.1, 0.2}});
    // identity: (0.9²+0.1²) + (0.9²+0.2²) = 1.67; swap: (0.1²+0.2²) + (0.1²+0.1²) = 0.07
    EXPECT_NEAR(brute_force_ot(mu, nu, 2.0).cost_value, 0.07 / 2.0, 1e-12);
}

TEST(Wasserstein, DiagonalAndSymmetry) {
    for (std::size_t d : {1u, 2u, 5u}) {
        EXPECT_NEAR(wasserstein_p(dirac(Point(d, 0.0)), dirac(Point(d, 1.0)), 1.0), std::sqrt(double(d)), 1e-12);
        EXPECT_NEAR(wasserstein_p(dirac(Point(d, 0.0)), dirac(Point(d, 1.0)), 2.0), std::sqrt(double(d)), 1e-12);
    }
    Rng rng = make_rng(8);
    auto a = test::random_measure(9, 2, rng, false), b = test::random_measure(7, 2, rng, false);
    EXPECT_NEAR(wasserstein_p(a, b, 1.5), wasserstein_p(b, a, 1.5), 1e-9);
}

TEST(Wasserstein, TriangleInequality) {
    Rng rng = make_rng(9);
    for (int t = 0; t < 60; ++t) {
        const double p = t % 2 ? 1.0 : 2.0;
        auto a = test::random_measure(6, 2, rng, false), b = test::random_measure(5, 2, rng, false),
             c = test::random_measure(7, 2, rng, false);
        EXPECT_LE(wasserstein_p(a, c, p), wasserstein_p(a, b, p) + wasserstein_p(b, c, p) + 1e-9);
    }
}

TEST(Wasserstein, BoundedByDiameterTimesTv) {
    Rng rng = make_rng(10);
    for (int t = 0; t < 100; ++t) {
        const double p = t % 2 ? 1.0 : 2.0;
        auto a = test::random_measure(5, 2, rng, false);
        auto b = test::perturb_weights(a, rng);
        const double diam = diameter(a);
        EXPECT_LE(wasserstein_p(a, b, p), diam * std::pow(tv_distance(a, b), 1.0 / p) + 1e-9);
    }
}

TEST(OneDimensional, Examples) {
    EXPECT_NEAR(ot_1d(dirac({0.0}), dirac({1.0}), 1.0).first, 1.0, 1e-15);
    EXPECT_NEAR(ot_1d(empirical({{0.0}, {2.0}}), empirical({{1.0}, {3.0}}), 1.0).first, 1.0, 1e-15);
    EXPECT_THROW(ot_1d(dirac({0.0, 1.0}), dirac({0.0, 1.0}), 1.0), InvalidArgument);
}

TEST(OneDimensional, MatchesOracles) {
    Rng rng = make_rng(12);
    for (int t = 0; t < 100; ++t) {
        const double p = t % 2 ? 1.0 : 2.0;
        auto mu = test::random_measure(6, 1, rng, true), nu = test::random_measure(6, 1, rng, true);
        EXPECT_NEAR(std::pow(ot_1d(mu, nu, p).first, p), brute_force_ot(mu, nu, p).cost_value, 1e-9);
        auto a = test::random_measure(4 + t % 5, 1, rng, false), b = test::random_measure(3 + t % 4, 1, rng, false);
        auto [v, plan] = ot_1d(a, b, p);
        EXPECT_NEAR(std::pow(v, p), exact_ot(a, b, p).cost_value, 1e-9);
        EXPECT_LE(plan.marginal_violation(), 1e-12);
    }
}

TEST(OneDimensional, DuplicatesAndTies) {
    auto mu = make_discrete({{1.0}, {0.0}, {1.0}}, {1, 1, 2});
    auto nu = make_discrete({{0.5}, {0.5}}, {1, 1});
    auto [v, plan] = ot_1d(mu, nu, 1.0);
    EXPECT_NEAR(v, 0.5, 1e-15);
    EXPECT_LE(plan.marginal_violation(), 1e-15);
}

TEST(RoundPlan, FeasibleInputUnchanged) {
    auto mu = make_discrete({{0.0}, {1.0}}, {0.3, 0.7});
    auto nu = make_discrete({{0.0}, {2.0}, {3.0}}, {0.2, 0.5, 0.3});
    std::vector<double> raw(6);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) raw[i * 3 + j] = mu.weight(i) * nu.weight(j);
    auto plan = round_plan_to_feasible(raw, mu, nu);
    for (const auto& e : plan.entries) EXPECT_NEAR(e.mass, raw[e.i * 3 + e.j], 1e-12);
}

TEST(RoundPlan, RepairsRowSurplus) {
    auto mu = empirical({{0.0}, {1.0}});
    auto nu = empirical({{0.0}, {1.0}});
    std::vector<double> raw = {0.55, 0.0, 0.0, 0.5};  // 10% surplus on row 0
    double viol = 0.05;
    auto plan = round_plan_to_feasible(raw, mu, nu);
    EXPECT_LE(plan.marginal_violation(), 1e-12);
    double change = 0.0;
    std::vector<double> out(4, 0.0);
    for (const auto& e : plan.entries) out[e.i * 2 + e.j] = e.mass;
    for (int k = 0; k < 4; ++k) change += std::abs(out[k] - raw[k]);
    EXPECT_LE(change, 2.0 * viol + 1e-12);
    EXPECT_THROW(round_plan_to_feasible({0, 0, 0, 0}, mu, nu), InvalidArgument);
}

TEST(Sinkhorn, PointMasses) {
    auto sol = sinkhorn(dirac({0.0, 0.0}), dirac({1.0, 2.0}), 2.0, 0.3);
    EXPECT_NEAR(sol.primal_value, 5.0, 1e-9);
    EXPECT_NEAR(sol.plan.entries.at(0).mass, 1.0, 1e-12);
    EXPECT_THROW(sinkhorn(dirac({0.0}), dirac({1.0}), 1.0, 0.0), InvalidArgument);
}

TEST(Sinkhorn, PotentialsReproduceRawPlan) {
    Rng rng = make_rng(14);
    auto mu = test::random_measure(8, 2, rng, false), nu = test::random_measure(6, 2, rng, false);
    const double tau = 0.05;
    auto sol = sinkhorn(mu, nu, 2.0, tau);
    ASSERT_TRUE(sol.converged);
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) {
            const double c = powered_distance(mu.point(i), nu.point(j), 2.0);
            const double expect = (sol.f[i] + sol.g[j] - c) / tau + std::log(mu.weight(i) * nu.weight(j));
            EXPECT_NEAR(std::log(sol.raw[i * nu.size() + j]), expect, 1e-6);
        }
    EXPECT_LE(sol.plan.marginal_violation(), 1e-12);
}

TEST(Sinkhorn, RoundedCostAboveOptimumAndShrinkingGap) {
    Rng rng = make_rng(15);
    for (int t = 0; t < 10; ++t) {
        auto mu = test::random_measure(7, 2, rng, false), nu = test::random_measure(9, 2, rng, false);
        const double opt = exact_ot(mu, nu, 1.0).cost_value;
        double prev = std::numeric_limits<double>::infinity();
        for (double tau : {0.5, 0.1, 0.02}) {
            auto sol = sinkhorn(mu, nu, 1.0, tau);
            EXPECT_GE(sol.plan.cost_value, opt - 1e-9);
            EXPECT_GE(sol.primal_value, opt - 1e-9);
            const double gap = sol.plan.cost_value - opt;
            EXPECT_LE(gap, prev + 1e-9);
            prev = gap;
        }
    }
}

TEST(Sinkhorn, LargeTauGivesProductCoupling) {
    auto mu = make_discrete({{0.0}, {1.0}}, {0.3, 0.7});
    auto nu = make_discrete({{0.0}, {5.0}}, {0.6, 0.4});
    auto sol = sinkhorn(mu, nu, 1.0, 1e5);
    for (const auto& e : sol.plan.entries) EXPECT_NEAR(e.mass, mu.weight(e.i) * nu.weight(e.j), 1e-3);
}

TEST(Sinkhorn, DualObjectiveIsMonotone) {
    Rng rng = make_rng(16);
    auto mu = test::random_measure(10, 2, rng, false), nu = test::random_measure(12, 2, rng, false);
    SinkhornOptions opt;
    opt.record_dual = true;
    auto sol = sinkhorn(mu, nu, 2.0, 0.01, opt);
    ASSERT_GE(sol.dual_trace.size(), 2u);
    for (std::size_t k = 1; k < sol.dual_trace.size(); ++k) EXPECT_GE(sol.dual_trace[k], sol.dual_trace[k - 1] - 1e-10);
}

TEST(Sinkhorn, ScalingWarmStartAgrees) {
    Rng rng = make_rng(17);
    auto mu = test::random_measure(10, 2, rng, false), nu = test::random_measure(10, 2, rng, false);
    SinkhornOptions warm;
    warm.tau_scaling = true;
    auto a = sinkhorn(mu, nu, 1.0, 0.01), b = sinkhorn(mu, nu, 1.0, 0.01, warm);
    EXPECT_NEAR(a.primal_value, b.primal_value, 1e-6);
}
