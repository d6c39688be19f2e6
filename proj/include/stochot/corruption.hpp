#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stochot/measures.hpp"
#include "stochot/ot/exact.hpp"
#include "stochot/ot/network_simplex.hpp"
#include "stochot/rng.hpp"

namespace stochot {

struct CorruptionBudget {
    double eps = 0.0;
    double rho = 0.0;
    double p = 1.0;

    void validate() const {
        require(eps >= 0.0 && eps <= 1.0, "budget: eps must lie in [0,1]");
        require(rho >= 0.0 && std::isfinite(rho), "budget: rho must be nonnegative");
        require(p >= 1.0, "budget: p must be >= 1");
    }
};

struct AdversaryStrategy {
    enum class Kind { RandomRelocate, DirectedShift, Composite };
    Kind kind = Kind::Composite;
    /// Outliers are uniform on a sphere of radius outlier_scale · max(diam, 1) around the sample mean.
    double outlier_scale = 10.0;
    /// Shift direction; normalized internally. Empty means (1,...,1)/√d.
    Point direction;
};

inline AdversaryStrategy::Kind parse_adversary(const std::string& s) {
    if (s == "relocate") return AdversaryStrategy::Kind::RandomRelocate;
    if (s == "shift") return AdversaryStrategy::Kind::DirectedShift;
    if (s == "composite") return AdversaryStrategy::Kind::Composite;
    throw InvalidArgument("unknown adversary '" + s + "'");
}

struct CorruptionResult {
    std::vector<Point> points;
    std::vector<std::size_t> relocated;  // indices overwritten by outliers
    std::string warning;
};

/// Per-index bookkeeping check: some S with |S| ≥ (1−ε)n has (1/n)Σ_S ‖X̃_i − X_i‖^p ≤ ρ^p.
/// The complement of the relocated set is used as S.
inline bool satisfies_budget(const std::vector<Point>& original, const CorruptionResult& res,
                             const CorruptionBudget& b) {
    const std::size_t n = original.size();
    if (res.points.size() != n) return false;
    std::vector<bool> out(n, false);
    for (auto i : res.relocated) out[i] = true;
    const double kept = static_cast<double>(n - res.relocated.size());
    if (kept < (1.0 - b.eps) * static_cast<double>(n) - 1e-9) return false;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (!out[i]) s += powered_distance(res.points[i], original[i], b.p);
    s /= static_cast<double>(n);
    return s <= std::pow(b.rho, b.p) * (1.0 + 1e-9) + 1e-15;
}

/// Shift (W_p part) then relocate ⌊εn⌋ points (TV part), per the strategy.
inline CorruptionResult corrupt(const std::vector<Point>& samples, const CorruptionBudget& budget,
                                const AdversaryStrategy& strat, Rng& rng) {
    budget.validate();
    require(!samples.empty(), "corrupt: empty sample list");
    const std::size_t n = samples.size(), d = samples.front().size();
    CorruptionResult res{samples, {}, {}};
    using K = AdversaryStrategy::Kind;

    if (strat.kind != K::RandomRelocate && budget.rho > 0.0) {
        Point v = strat.direction.empty() ? Point(d, 1.0) : strat.direction;
        require(v.size() == d, "corrupt: shift direction has wrong dimension");
        const double nv = norm(v);
        require(nv > 0.0, "corrupt: zero shift direction");
        for (double& c : v) c *= budget.rho / nv;
        for (auto& x : res.points)
            for (std::size_t k = 0; k < d; ++k) x[k] += v[k];
    }

    if (strat.kind != K::DirectedShift && budget.eps > 0.0) {
        const auto count = static_cast<std::size_t>(std::floor(budget.eps * static_cast<double>(n) + 1e-9));
        if (count == 0) {
            res.warning = "eps * n < 1: no points relocated";
            return res;
        }
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(count);
        std::sort(idx.begin(), idx.end());
        Point center(d, 0.0);
        for (const auto& x : samples)
            for (std::size_t k = 0; k < d; ++k) center[k] += x[k] / static_cast<double>(n);
        const double radius = strat.outlier_scale * std::max(diameter(samples), 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto i : idx) {
            Point g(d);
            double ng = 0.0;
            while (ng == 0.0) {
                for (double& c : g) c = normal(rng);
                ng = norm(g);
            }
            for (std::size_t k = 0; k < d; ++k) res.points[i][k] = center[k] + radius * g[k] / ng;
        }
        res.relocated = std::move(idx);
    }
    return res;
}

/// Optimal partial transport: μ' = μ − α + β with α ≤ μ, |α| = |β| ≤ ε.
struct RobustWpResult {
    double value = 0.0;
    DiscreteMeasure mu_prime;  // a minimizer over TV(μ', μ) ≤ ε
};

/// min over TV(μ', μ) ≤ ε of W_p(μ', ν), as a transport problem with an ε-mass slack
/// source and slack sink at zero cost.
inline RobustWpResult robust_wp_witness(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, double p,
                                        const ExactOtOptions& opt = {}) {
    require(mu.dim() == nu.dim(), "robust_wp: dimension mismatch");
    require(eps >= 0.0 && eps <= 1.0, "robust_wp: eps must lie in [0,1]");
    require(mu.size() <= opt.support_cap && nu.size() <= opt.support_cap, "robust_wp: support cap exceeded");
    const std::size_t n = mu.size(), m = nu.size();
    const CostMatrix c = cost_matrix(mu, nu, p);
    std::vector<double> cost((n + 1) * (m + 1), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * (m + 1) + j] = c(i, j);
    std::vector<double> a(mu.weights().begin(), mu.weights().end()), b(nu.weights().begin(), nu.weights().end());
    a.push_back(eps);
    b.push_back(eps);
    for (double& v : a) v /= 1.0 + eps;
    for (double& v : b) v /= 1.0 + eps;
    auto flows = detail::solve_transport(n + 1, m + 1, cost, a, b);

    double value = 0.0;
    std::vector<double> keep(mu.weights().begin(), mu.weights().end());
    std::vector<double> add(m, 0.0);
    for (const auto& f : flows) {
        const double mass = f.mass * (1.0 + eps);
        if (f.i < n && f.j < m) value += mass * c(f.i, f.j);
        if (f.i < n && f.j == m) keep[f.i] -= mass;
        if (f.i == n && f.j < m) add[f.j] += mass;
    }
    std::vector<double> coords, w;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i] > 1e-15) {
            auto x = mu.point(i);
            coords.insert(coords.end(), x.begin(), x.end());
            w.push_back(keep[i]);
        }
    for (std::size_t j = 0; j < m; ++j)
        if (add[j] > 1e-15) {
            auto y = nu.point(j);
            coords.insert(coords.end(), y.begin(), y.end());
            w.push_back(add[j]);
        }
    RobustWpResult out;
    out.value = std::pow(std::max(value, 0.0), 1.0 / p);
    out.mu_prime = make_discrete_flat(mu.dim(), std::move(coords), std::move(w));
    return out;
}

inline double robust_wp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, double p,
                        const ExactOtOptions& opt = {}) {
    return robust_wp_witness(mu, nu, eps, p, opt).value;
}

/// ν = (1−ε)δ_0 + εδ_y with y = (1,...,1); μ1 = ν, μ2 = δ_0; the observation is ν.
struct LbInstanceTv {
    DiscreteMeasure nu, mu1, mu2, observed;
    Point y;
};

inline LbInstanceTv lb_instance_tv(double eps, std::size_t d) {
    require(eps > 0.0 && eps < 1.0, "lb_instance_tv: eps must lie in (0,1)");
    require(d >= 1, "lb_instance_tv: dimension must be positive");
    LbInstanceTv inst;
    inst.y = Point(d, 1.0);
    inst.nu = make_discrete({Point(d, 0.0), inst.y}, {1.0 - eps, eps});
    inst.mu1 = inst.nu;
    inst.mu2 = dirac(Point(d, 0.0));
    inst.observed = inst.nu;
    return inst;
}

/// ν = ½δ_{−y} + ½δ_y; μ_t = (½−t)δ_{−cy} + (½+t)δ_{cy} with c = t^{1/p} = min(ρ^{1/2}d^{−1/4}/2, ½).
struct LbInstanceWp {
    DiscreteMeasure nu, mu0, mut;
    double c = 0.0, t = 0.0;
    Point y;
};

inline LbInstanceWp lb_instance_wp(double rho, std::size_t d, double p) {
    require(rho > 0.0, "lb_instance_wp: rho must be positive");
    require(d >= 1 && p >= 1.0, "lb_instance_wp: need d >= 1 and p >= 1");
    LbInstanceWp inst;
    const double dd = static_cast<double>(d);
    inst.c = std::min(std::sqrt(rho) * std::pow(dd, -0.25) / 2.0, 0.5);
    inst.t = std::pow(inst.c, p);
    inst.y = Point(d, 1.0);
    Point neg(d, -1.0), cy(d, inst.c), ncy(d, -inst.c);
    inst.nu = make_discrete({neg, inst.y}, {0.5, 0.5});
    inst.mu0 = make_discrete({ncy, cy}, {0.5, 0.5});
    inst.mut = make_discrete({ncy, cy}, {0.5 - inst.t, 0.5 + inst.t});
    return inst;
}

}  // namespace stochot
