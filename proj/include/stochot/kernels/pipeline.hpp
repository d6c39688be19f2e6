#pragma once

#include <cmath>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "stochot/kernels/stages.hpp"
#include "stochot/measures.hpp"
#include "stochot/rng.hpp"

namespace stochot {

struct MonteCarloConfig {
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    std::size_t replicates = 10;
};

/// Markov kernel as an ordered list of stages, applied first to last.
struct KernelPipeline {
    std::vector<Stage> stages;

    KernelPipeline() = default;
    explicit KernelPipeline(std::vector<Stage> s) : stages(std::move(s)) {}

    static KernelPipeline identity() { return {}; }
    static KernelPipeline of(Stage s) { return KernelPipeline({std::move(s)}); }

    bool has_continuous_stage() const {
        for (const auto& s : stages)
            if (is_continuous_stochastic(s)) return true;
        return false;
    }
};

/// outer ∘ inner: run inner's stages, then outer's.
inline KernelPipeline compose(const KernelPipeline& outer, const KernelPipeline& inner) {
    KernelPipeline out = inner;
    for (std::size_t k = 0; k < outer.stages.size(); ++k) {
        const auto& s = outer.stages[k];
        if (k == 0 && std::holds_alternative<DiscreteKernelStage>(s) && !inner.stages.empty()) {
            const auto& prev = inner.stages.back();
            const bool finite = std::holds_alternative<NearestLookup>(prev) ||
                                std::holds_alternative<DiscreteKernelStage>(prev) ||
                                std::holds_alternative<DeterministicMap>(prev) ||
                                std::holds_alternative<RoundToPartition>(prev) ||
                                std::holds_alternative<SoftmaxStage>(prev) ||
                                std::holds_alternative<Quantile1DStage>(prev);
            require(finite, "compose: discrete kernel stage must follow a stage with finite output");
            if (const auto* nl = std::get_if<NearestLookup>(&prev)) {
                const auto& k2 = *std::get<DiscreteKernelStage>(s).kernel;
                for (std::size_t a = 0; a < nl->size(); ++a)
                    require(k2.contains(nl->anchor(a)), "compose: lookup anchors are not in the kernel's source support");
            }
        }
        out.stages.push_back(s);
    }
    return out;
}

/// Joint law of (x, κ_x) for x ~ μ: the output support plus (source, output, mass) entries.
struct KernelImage {
    std::size_t out_dim = 0;
    std::vector<double> out_coords;
    std::vector<double> out_mass;
    std::vector<PlanEntry> entries;  // i indexes μ's atoms, j indexes output atoms
    bool monte_carlo = false;

    std::size_t out_size() const { return out_mass.size(); }
    PointView out_point(std::size_t j) const { return {out_coords.data() + j * out_dim, out_dim}; }
};

namespace detail {

inline void merge_into(Cloud& acc, std::map<AtomKey, std::size_t>& index, Point y, double w) {
    auto [it, inserted] = index.try_emplace(atom_key(y), acc.size());
    if (inserted)
        acc.emplace_back(std::move(y), w);
    else
        acc[it->second].second += w;
}

inline Cloud apply_exact_stage(const Stage& s, const Cloud& in) {
    Cloud out;
    std::map<AtomKey, std::size_t> index;
    for (const auto& [z, w] : in)
        for (auto& [y, q] : stage_distribution(s, z)) merge_into(out, index, std::move(y), w * q);
    return out;
}

inline Cloud apply_gaussian(const GaussianConvolution& g, const Cloud& in, std::size_t particles, Rng& rng) {
    std::vector<double> w(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) w[k] = in[k].second;
    AtomSampler pick(w);
    std::normal_distribution<double> normal(0.0, 1.0);
    Cloud out;
    out.reserve(particles);
    const double mass = 1.0 / static_cast<double>(particles);
    for (std::size_t s = 0; s < particles; ++s) {
        const Point& z = in.size() == 1 ? in.front().first : in[pick(rng)].first;
        Point y = z;
        for (double& v : y) v += g.sigma * normal(rng);
        out.emplace_back(std::move(y), mass);
    }
    return out;
}

/// Conditional output at x. Finite stages are applied exactly; each Gaussian stage
/// turns the current cloud into `particles` equally weighted noisy draws.
inline Cloud propagate(const KernelPipeline& k, PointView x, std::size_t particles, Rng* rng) {
    Cloud cloud{{Point(x.begin(), x.end()), 1.0}};
    for (const auto& s : k.stages) {
        if (const auto* g = std::get_if<GaussianConvolution>(&s)) {
            require(rng != nullptr, "pipeline: a Gaussian stage needs a Monte-Carlo configuration");
            cloud = apply_gaussian(*g, cloud, particles, *rng);
        } else {
            cloud = apply_exact_stage(s, cloud);
        }
    }
    return cloud;
}

}  // namespace detail

/// Joint image of μ under k. Exact unless a Gaussian stage is present; then atom i
/// receives max(1, ⌈samples·μ_i⌉) particles drawn from a stream derived from (seed, i).
inline KernelImage kernel_image(const KernelPipeline& k, const DiscreteMeasure& mu, const MonteCarloConfig& mc = {}) {
    KernelImage img;
    img.monte_carlo = k.has_continuous_stage();
    if (img.monte_carlo) require(mc.samples >= 1, "pipeline: Monte-Carlo sample count must be positive");
    std::map<detail::AtomKey, std::size_t> index;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(mu.weight(i) > 0.0)) continue;
        Rng rng = make_rng(derive_seed(mc.seed, {i}));
        const std::size_t particles = img.monte_carlo
            ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(mc.samples) * mu.weight(i))))
            : 1;
        Cloud out = detail::propagate(k, mu.point(i), particles, &rng);
        // merge duplicates within this atom's conditional
        std::map<std::size_t, double> row;
        for (auto& [y, q] : out) {
            if (img.out_dim == 0) img.out_dim = y.size();
            require(y.size() == img.out_dim, "pipeline: inconsistent output dimension");
            auto [it, inserted] = index.try_emplace(detail::atom_key(y), img.out_mass.size());
            if (inserted) {
                img.out_coords.insert(img.out_coords.end(), y.begin(), y.end());
                img.out_mass.push_back(0.0);
            }
            row[it->second] += q;
        }
        for (const auto& [j, q] : row) {
            img.out_mass[j] += mu.weight(i) * q;
            img.entries.push_back({i, j, mu.weight(i) * q});
        }
    }
    return img;
}

/// κ♯μ. Exact for finite pipelines, a weighted Monte-Carlo cloud otherwise.
inline DiscreteMeasure pushforward(const KernelPipeline& k, const DiscreteMeasure& mu, const MonteCarloConfig& mc = {}) {
    auto img = kernel_image(k, mu, mc);
    return make_discrete_flat(img.out_dim, std::move(img.out_coords), std::move(img.out_mass));
}

inline DiscreteMeasure pushforward(const DiscreteKernel& k, const DiscreteMeasure& mu) {
    return pushforward(KernelPipeline::of(DiscreteKernelStage{std::make_shared<DiscreteKernel>(k)}), mu);
}

/// (∬‖x − y‖^p dκ_x(y) dμ(x))^{1/p}.
inline double transport_cost(const KernelImage& img, const DiscreteMeasure& mu, double p) {
    double s = 0.0;
    for (const auto& e : img.entries) s += e.mass * powered_distance(mu.point(e.i), img.out_point(e.j), p);
    return std::pow(std::max(s, 0.0), 1.0 / p);
}

inline double transport_cost(const KernelPipeline& k, const DiscreteMeasure& mu, double p, const MonteCarloConfig& mc = {}) {
    return transport_cost(kernel_image(k, mu, mc), mu, p);
}

/// One draw from κ_x.
inline Point evaluate_at(const KernelPipeline& k, PointView x, Rng& rng) {
    Point cur(x.begin(), x.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& s : k.stages) {
        if (const auto* g = std::get_if<GaussianConvolution>(&s)) {
            for (double& v : cur) v += g->sigma * normal(rng);
            continue;
        }
        Cloud c = stage_distribution(s, cur);
        if (c.size() == 1) {
            cur = std::move(c.front().first);
        } else {
            std::vector<double> w(c.size());
            for (std::size_t t = 0; t < c.size(); ++t) w[t] = c[t].second;
            cur = std::move(c[AtomSampler(w)(rng)].first);
        }
    }
    return cur;
}

}  // namespace stochot
