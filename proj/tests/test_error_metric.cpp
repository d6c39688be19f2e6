#include <cmath>

#include <gtest/gtest.h>

#include "property_checks.hpp"
#include "stochot/error_metric.hpp"
#include "stochot/experiments/generators.hpp"

using namespace stochot;
using test::pipeline_of;

namespace {

constexpr double kSlack = 1e-7;

template <class F>
void expect_property(std::uint64_t seed, int trials, F&& check) {
    test::CheckTally tally;
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        tally.add(check(rng), kSlack);
    }
    EXPECT_EQ(tally.violations, 0u) << "worst excess " << tally.worst_excess;
}

}  // namespace

TEST(TransportationError, OptimalKernelVanishes) {
    Rng rng = make_rng(1);
    for (int t = 0; t < 40; ++t) {
        const double p = t % 2 ? 2.0 : 1.0;
        auto mu = test::random_measure(2 + t % 9, 1 + t % 3, rng, false);
        auto nu = test::random_measure(2 + (t * 5) % 9, 1 + t % 3, rng, false);
        auto rep = transportation_error(kernel_from_plan(exact_ot(mu, nu, p)), mu, nu, p);
        EXPECT_LE(rep.ep, 1e-9);
        EXPECT_NEAR(rep.transport_cost, rep.wp_mu_nu, 1e-9);
    }
}

TEST(TransportationError, NullKernelOnPointMass) {
    DiscreteKernel k({{0.0, 0.0}}, {{0.0, 0.0}}, {{{0, 1.0}}});
    auto rep = transportation_error(k, dirac({0.0, 0.0}), dirac({3.0, 4.0}), 1.0);
    EXPECT_NEAR(rep.optimality_gap, 0.0, 1e-12);
    EXPECT_NEAR(rep.feasibility_gap, 5.0, 1e-12);
    EXPECT_NEAR(rep.ep, 5.0, 1e-12);
    EXPECT_EQ(rep.mc_stderr, 0.0);
}

TEST(TransportationError, IdentityKernelPaysOnlyFeasibility) {
    Rng rng = make_rng(2);
    auto mu = test::random_measure(6, 2, rng, false), nu = test::random_measure(5, 2, rng, false);
    auto rep = transportation_error(KernelPipeline::identity(), mu, nu, 2.0);
    EXPECT_EQ(rep.transport_cost, 0.0);
    EXPECT_EQ(rep.optimality_gap, 0.0);
    EXPECT_NEAR(rep.feasibility_gap, wasserstein_p(mu, nu, 2.0), 1e-12);
}

TEST(TransportationError, ReportDecomposition) {
    Rng rng = make_rng(3);
    for (int t = 0; t < 50; ++t) {
        auto in = test::random_instance(rng);
        auto r = transportation_error(in.kernel, in.mu, in.nu, in.p);
        EXPECT_NEAR(r.optimality_gap, std::max(r.transport_cost - r.wp_mu_nu, 0.0), 1e-12);
        EXPECT_NEAR(r.ep, r.optimality_gap + r.feasibility_gap, 1e-12);
        EXPECT_GE(r.feasibility_gap, 0.0);
    }
}

TEST(TransportationError, KnownWpIsReused) {
    auto mu = dirac({0.0}), nu = dirac({1.0});
    ErrorOptions opt;
    opt.wp_mu_nu = 0.25;
    auto rep = transportation_error(KernelPipeline::identity(), mu, nu, 1.0, {}, opt);
    EXPECT_EQ(rep.wp_mu_nu, 0.25);
}

TEST(TransportationError, Figure2KernelIsNearlyOptimal) {
    auto inst = gen_figure2(200, 0.05);
    auto rep = transportation_error(inst.kappa_star, inst.mu, inst.nu, 1.0);
    EXPECT_LE(rep.optimality_gap, 1e-9);
    EXPECT_LE(rep.feasibility_gap, 0.05);
    EXPECT_LE(rep.ep, 0.05);
}

TEST(TransportationError, MonteCarloReportsStderr) {
    auto mu = make_discrete({{0.0}, {1.0}}, {0.5, 0.5});
    auto nu = make_discrete({{0.0}, {1.0}}, {0.5, 0.5});
    auto k = KernelPipeline::of(GaussianConvolution{0.05});
    MonteCarloConfig mc{400, 5, 6};
    auto a = transportation_error(k, mu, nu, 1.0, mc), b = transportation_error(k, mu, nu, 1.0, mc);
    EXPECT_EQ(a.ep, b.ep);
    EXPECT_GT(a.mc_stderr, 0.0);
    EXPECT_LT(a.ep, 0.2);
}

TEST(MongeGap, OptimalKernelVanishes) {
    Rng rng = make_rng(4);
    for (int t = 0; t < 30; ++t) {
        const double p = t % 2 ? 2.0 : 1.0;
        auto mu = test::random_measure(7, 2, rng, false), nu = test::random_measure(6, 2, rng, false);
        EXPECT_LE(monge_gap_error(pipeline_of(kernel_from_plan(exact_ot(mu, nu, p))), mu, nu, p), 1e-6);
    }
}

TEST(LpMapDistance, Examples) {
    Rng rng = make_rng(5);
    auto mu = test::random_measure(8, 3, rng, false);
    auto id = KernelPipeline::of(DeterministicMap::identity(3));
    EXPECT_EQ(lp_map_distance(id, id, mu, 1.0), 0.0);
    auto shifted = KernelPipeline::of(DeterministicMap::translation({1.0, 2.0, 2.0}));
    EXPECT_NEAR(lp_map_distance(shifted, id, mu, 1.0), 3.0, 1e-12);
    EXPECT_NEAR(lp_map_distance(shifted, id, mu, 2.0), 3.0, 1e-12);
    EXPECT_THROW(lp_map_distance(KernelPipeline::of(GaussianConvolution{1.0}), id, mu, 1.0), InvalidArgument);
}

TEST(Stability, TargetPerturbation) { expect_property(10, 80, test::check_nu_stability); }
TEST(Stability, AffineSourcePerturbation) { expect_property(11, 80, test::check_affine_stability); }
TEST(Stability, RefinedTotalVariation) { expect_property(12, 80, test::check_refined_tv); }
TEST(Stability, Composition) { expect_property(13, 80, test::check_composition); }
TEST(Stability, CodomainRestriction) { expect_property(14, 80, test::check_codomain_restriction); }
TEST(Stability, MapComparison) { expect_property(15, 80, test::check_map_comparison); }
TEST(Stability, MongeGapComparison) { expect_property(16, 80, test::check_monge_gap); }

TEST(MetricFacts, KsAndTv) { expect_property(17, 200, test::check_ks_facts); }
TEST(MetricFacts, WassersteinByTv) { expect_property(18, 200, test::check_tv_wp_fact); }
