#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "stochot/kernels/discrete_kernel.hpp"
#include "stochot/kernels/pipeline.hpp"
#include "stochot/measures.hpp"
#include "stochot/ot/exact.hpp"
#include "stochot/rng.hpp"

namespace stochot {

/// Ground-truth pair with an optional reference map or kernel.
struct GroundTruth {
    DiscreteMeasure mu, nu;
    std::optional<KernelPipeline> t_star;
};

/// Deterministic table map read off a permutation plan (largest column per row).
inline KernelPipeline map_from_plan(const TransportPlan& plan) {
    const std::size_t n = plan.source.size();
    std::vector<std::size_t> best(n, 0);
    std::vector<double> mass(n, -1.0);
    for (const auto& e : plan.entries)
        if (e.mass > mass[e.i]) {
            mass[e.i] = e.mass;
            best[e.i] = e.j;
        }
    std::vector<Point> keys = plan.source.points(), vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = plan.target.point_copy(best[i]);
    return KernelPipeline::of(DeterministicMap::from_table(std::move(keys), std::move(vals), "target support"));
}

/// μ uniform on N draws from {0}×[0,1]^{d−1}; ν uniform on N draws from the even
/// mixture of {−1}×[0,1]^{d−1} and {+1}×[0,1]^{d−1}; t_star from the exact permutation.
inline GroundTruth gen_setting_a(std::size_t N, std::size_t d, Rng& rng, double p = 1.0) {
    require(d >= 2, "setting A: d must be at least 2");
    require(N >= 1, "setting A: N must be positive");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<Point> xs(N, Point(d)), ys(N, Point(d));
    for (auto& x : xs) {
        x[0] = 0.0;
        for (std::size_t k = 1; k < d; ++k) x[k] = u(rng);
    }
    for (auto& y : ys) {
        y[0] = coin(rng) ? 1.0 : -1.0;
        for (std::size_t k = 1; k < d; ++k) y[k] = u(rng);
    }
    GroundTruth g{empirical(xs), empirical(ys), std::nullopt};
    g.t_star = map_from_plan(exact_ot(g.mu, g.nu, p));
    return g;
}

/// μ uniform on N draws from [−1,1]^d and ν = f♯μ with f(x) = x + sign(x).
inline GroundTruth gen_setting_b(std::size_t N, std::size_t d, Rng& rng) {
    require(d >= 1 && N >= 1, "setting B: need d >= 1 and N >= 1");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Point> xs(N, Point(d));
    for (auto& x : xs)
        for (double& v : x) v = u(rng);
    const auto f = DeterministicMap::orthant_shift(1.0);
    std::vector<Point> ys;
    ys.reserve(N);
    for (const auto& x : xs) ys.push_back(f.apply(x));
    return {empirical(xs), empirical(ys), KernelPipeline::of(f)};
}

/// The δ-oscillation instance: μ uniform on M midpoints of {0}×[0,1], ν = T*♯μ with
/// T*(x) = ((−1)^{⌊x₂/δ⌋}, x₂), plus the two-point kernel and the flipped map.
struct Figure2Instance {
    DiscreteMeasure mu, nu;
    KernelPipeline kappa_star;  // x ↦ Unif{(−1,x₂),(1,x₂)}
    KernelPipeline t_star;
    KernelPipeline t_flipped;  // x ↦ (−(−1)^{⌊x₂/δ⌋}, x₂)
};

inline Figure2Instance gen_figure2(std::size_t M, double delta) {
    require(M >= 2, "figure2: need at least two grid points");
    require(delta > 0.0, "figure2: delta must be positive");
    std::vector<Point> xs, ys, flipped, targets;
    std::vector<DiscreteKernel::Row> rows;
    for (std::size_t k = 0; k < M; ++k) {
        const double x2 = (static_cast<double>(k) + 0.5) / static_cast<double>(M);
        const double s = (static_cast<long long>(std::floor(x2 / delta)) % 2 == 0) ? 1.0 : -1.0;
        xs.push_back({0.0, x2});
        ys.push_back({s, x2});
        flipped.push_back({-s, x2});
        targets.push_back({-1.0, x2});
        targets.push_back({1.0, x2});
        rows.push_back({{2 * k, 0.5}, {2 * k + 1, 0.5}});
    }
    Figure2Instance inst;
    inst.mu = empirical(xs);
    inst.nu = empirical(ys);
    auto kernel = std::make_shared<const DiscreteKernel>(xs, targets, std::move(rows));
    inst.kappa_star = KernelPipeline::of(DiscreteKernelStage{kernel});
    inst.t_star = KernelPipeline::of(DeterministicMap::from_table(xs, ys));
    inst.t_flipped = KernelPipeline::of(DeterministicMap::from_table(xs, flipped));
    return inst;
}

/// μ, ν uniform over N draws from the black and white cells of a cells×cells board on [0,1]².
inline GroundTruth gen_checkerboard(std::size_t cells, std::size_t N, Rng& rng) {
    require(cells >= 2 && cells % 2 == 0, "checkerboard: cell count must be even");
    require(N >= 1, "checkerboard: N must be positive");
    const double w = 1.0 / static_cast<double>(cells);
    std::uniform_int_distribution<std::size_t> cell(0, cells - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](std::size_t parity) {
        std::vector<Point> pts;
        while (pts.size() < N) {
            const std::size_t i = cell(rng), j = cell(rng);
            if ((i + j) % 2 != parity) continue;
            pts.push_back({(static_cast<double>(i) + u(rng)) * w, (static_cast<double>(j) + u(rng)) * w});
        }
        return pts;
    };
    auto xs = draw(0);
    auto ys = draw(1);
    return {empirical(xs), empirical(ys), std::nullopt};
}

/// Sampling lower-bound fixture: μ = δ_0, so estimating the kernel reduces to estimating ν.
inline GroundTruth lb_instance_sampling(const DiscreteMeasure& nu) {
    return {dirac(Point(nu.dim(), 0.0)), nu, std::nullopt};
}

}  // namespace stochot
