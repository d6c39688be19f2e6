#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "stochot/measures.hpp"
#include "stochot/ot/network_simplex.hpp"
#include "stochot/ot/plan.hpp"

namespace stochot {

struct ExactOtOptions {
    std::size_t support_cap = 5000;
};

/// Optimal coupling via network simplex on the bipartite graph.
inline TransportPlan exact_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                              const ExactOtOptions& opt = {}) {
    require(mu.dim() == nu.dim(), "exact_ot: dimension mismatch");
    require(mu.size() <= opt.support_cap && nu.size() <= opt.support_cap, "exact_ot: support cap exceeded");
    const CostMatrix c = cost_matrix(mu, nu, p);
    auto flows = detail::solve_transport(mu.size(), nu.size(), c.data(), mu.weights(), nu.weights());
    std::vector<PlanEntry> entries;
    entries.reserve(flows.size());
    for (const auto& f : flows) entries.push_back({f.i, f.j, f.mass});
    return finalize_plan(mu, nu, std::move(entries), p);
}

/// Enumerates all n! bijections between two uniform measures of equal size n <= 8.
inline TransportPlan brute_force_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    require(mu.dim() == nu.dim(), "brute_force_ot: dimension mismatch");
    require(mu.size() == nu.size(), "brute_force_ot: support sizes differ");
    require(mu.size() <= 8, "brute_force_ot: n > 8");
    require(mu.is_uniform() && nu.is_uniform(), "brute_force_ot: weights must be uniform");
    const std::size_t n = mu.size();
    const CostMatrix c = cost_matrix(mu, nu, p);
    std::vector<std::size_t> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += c(i, perm[i]);
        if (s < best_cost) {
            best_cost = s;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::vector<PlanEntry> entries;
    for (std::size_t i = 0; i < n; ++i) entries.push_back({i, best[i], 1.0 / static_cast<double>(n)});
    return finalize_plan(mu, nu, std::move(entries), p);
}

/// Quantile coupling on the line; atoms sorted by (coordinate, input index).
inline std::pair<double, TransportPlan> ot_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    require(mu.dim() == 1 && nu.dim() == 1, "ot_1d: measures must be one-dimensional");
    require(p >= 1.0, "ot_1d: p must be >= 1");
    auto order = [](const DiscreteMeasure& m) {
        std::vector<std::size_t> idx(m.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&m](std::size_t a, std::size_t b) { return m.point(a)[0] < m.point(b)[0]; });
        return idx;
    };
    auto cumulative = [](const DiscreteMeasure& m, const std::vector<std::size_t>& idx) {
        std::vector<double> c(idx.size());
        double s = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) c[k] = (s += m.weight(idx[k]));
        c.back() = 1.0;
        return c;
    };
    const auto si = order(mu), sj = order(nu);
    const auto ca = cumulative(mu, si), cb = cumulative(nu, sj);
    std::vector<PlanEntry> entries;
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    // breakpoints closer than the solver's flow noise count as equal
    constexpr double tol = detail::TransportSimplex::kFlowNoise;
    while (i < si.size() && j < sj.size()) {
        const double next = std::min(ca[i], cb[j]);
        if (next - prev > tol) entries.push_back({si[i], sj[j], next - prev});
        prev = std::max(prev, next);
        if (ca[i] <= next + tol) ++i;
        if (cb[j] <= next + tol) ++j;
    }
    auto plan = finalize_plan(mu, nu, std::move(entries), p);
    const double value = std::pow(plan.cost_value, 1.0 / p);
    return {value, std::move(plan)};
}

/// (optimal cost)^{1/p}. One-dimensional inputs use the quantile coupling, which is exact.
inline double wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                            const ExactOtOptions& opt = {}) {
    require(mu.dim() == nu.dim(), "wasserstein_p: dimension mismatch");
    if (mu.dim() == 1) return ot_1d(mu, nu, p).first;
    return std::pow(std::max(exact_ot(mu, nu, p, opt).cost_value, 0.0), 1.0 / p);
}

}  // namespace stochot
