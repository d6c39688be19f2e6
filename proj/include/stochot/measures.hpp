#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "stochot/core.hpp"
#include "stochot/rng.hpp"

namespace stochot {

/// Finite weighted point cloud in R^d. Immutable once built; points are stored
/// row-major in one flat buffer. Duplicate points are kept as separate atoms.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;

    std::size_t size() const { return weights_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return weights_.empty(); }

    PointView point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    Point point_copy(std::size_t i) const {
        auto v = point(i);
        return {v.begin(), v.end()};
    }
    double weight(std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> coords() const { return coords_; }

    std::vector<Point> points() const {
        std::vector<Point> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) out.push_back(point_copy(i));
        return out;
    }

    /// True when every weight equals 1/n up to 1e-12.
    bool is_uniform() const {
        const double u = 1.0 / static_cast<double>(size());
        return std::all_of(weights_.begin(), weights_.end(),
                           [u](double w) { return std::abs(w - u) <= 1e-12; });
    }

    friend DiscreteMeasure make_discrete_flat(std::size_t dim, std::vector<double> coords,
                                              std::vector<double> weights);

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

/// Builds a measure from a flat row-major coordinate buffer. Weights are
/// normalized to sum to one; negative weights and non-finite values are rejected.
inline DiscreteMeasure make_discrete_flat(std::size_t dim, std::vector<double> coords,
                                          std::vector<double> weights) {
    require(!weights.empty(), "measure: empty input");
    require(dim > 0, "measure: dimension must be positive");
    require(coords.size() == dim * weights.size(), "measure: dimension mismatch");
    for (double c : coords) require(std::isfinite(c), "measure: non-finite coordinate");
    double total = 0.0;
    for (double w : weights) {
        require(std::isfinite(w), "measure: non-finite weight");
        require(w >= 0.0, "measure: negative weight");
        total += w;
    }
    require(total > 0.0, "measure: weights must have positive sum");
    if (std::abs(total - 1.0) > 1e-12)
        for (double& w : weights) w /= total;
    DiscreteMeasure m;
    m.dim_ = dim;
    m.coords_ = std::move(coords);
    m.weights_ = std::move(weights);
    return m;
}

inline DiscreteMeasure make_discrete(const std::vector<Point>& points, std::vector<double> weights) {
    require(!points.empty(), "measure: empty input");
    require(points.size() == weights.size(), "measure: points and weights differ in length");
    const std::size_t d = points.front().size();
    std::vector<double> coords;
    coords.reserve(d * points.size());
    for (const auto& p : points) {
        require(p.size() == d, "measure: dimension mismatch");
        coords.insert(coords.end(), p.begin(), p.end());
    }
    return make_discrete_flat(d, std::move(coords), std::move(weights));
}

/// Uniform weights 1/n on the given samples, duplicates preserved.
inline DiscreteMeasure empirical(const std::vector<Point>& samples) {
    require(!samples.empty(), "empirical: empty sample list");
    return make_discrete(samples, std::vector<double>(samples.size(), 1.0 / static_cast<double>(samples.size())));
}

inline DiscreteMeasure dirac(const Point& x) { return make_discrete({x}, {1.0}); }

/// Categorical sampler over atom indices (inverse-CDF on the cumulative weights).
class AtomSampler {
public:
    explicit AtomSampler(std::span<const double> weights) : cum_(weights.size()) {
        std::partial_sum(weights.begin(), weights.end(), cum_.begin());
    }
    std::size_t operator()(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, cum_.back());
        const double r = u(rng);
        auto it = std::upper_bound(cum_.begin(), cum_.end(), r);
        std::size_t i = static_cast<std::size_t>(it - cum_.begin());
        if (i >= cum_.size()) i = cum_.size() - 1;
        return i;
    }

private:
    std::vector<double> cum_;
};

inline std::vector<std::size_t> sample_indices(const DiscreteMeasure& m, std::size_t n, Rng& rng) {
    require(n >= 1, "sample: n must be at least 1");
    AtomSampler draw(m.weights());
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = draw(rng);
    return idx;
}

/// n i.i.d. categorical draws from m.
inline std::vector<Point> sample(const DiscreteMeasure& m, std::size_t n, Rng& rng) {
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i : sample_indices(m, n, rng)) out.push_back(m.point_copy(i));
    return out;
}

namespace detail {

using AtomKey = std::vector<std::uint64_t>;

inline AtomKey atom_key(PointView p) {
    AtomKey k(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) k[i] = std::bit_cast<std::uint64_t>(p[i]);
    return k;
}

}  // namespace detail

/// Merges atoms at bit-identical coordinates. Order of first appearance is kept.
inline DiscreteMeasure aggregate_atoms(const DiscreteMeasure& m) {
    std::map<detail::AtomKey, std::size_t> index;
    std::vector<double> coords, weights;
    for (std::size_t i = 0; i < m.size(); ++i) {
        auto [it, inserted] = index.try_emplace(detail::atom_key(m.point(i)), weights.size());
        if (inserted) {
            auto p = m.point(i);
            coords.insert(coords.end(), p.begin(), p.end());
            weights.push_back(m.weight(i));
        } else {
            weights[it->second] += m.weight(i);
        }
    }
    return make_discrete_flat(m.dim(), std::move(coords), std::move(weights));
}

/// (1/2) Σ |a(x) − b(x)| over the merged support.
inline double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    require(a.dim() == b.dim(), "tv_distance: dimension mismatch");
    std::map<detail::AtomKey, double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) diff[detail::atom_key(a.point(i))] += a.weight(i);
    for (std::size_t i = 0; i < b.size(); ++i) diff[detail::atom_key(b.point(i))] -= b.weight(i);
    double s = 0.0;
    for (const auto& [k, v] : diff) s += std::abs(v);
    return std::clamp(0.5 * s, 0.0, 1.0);
}

/// sup_t |F_a(t) − F_b(t)| with right-continuous CDFs, evaluated at every breakpoint.
inline double ks_distance_1d(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    require(a.dim() == 1 && b.dim() == 1, "ks_distance_1d: measures must be one-dimensional");
    std::vector<std::pair<double, double>> events;
    events.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) events.emplace_back(a.point(i)[0], a.weight(i));
    for (std::size_t i = 0; i < b.size(); ++i) events.emplace_back(b.point(i)[0], -b.weight(i));
    std::sort(events.begin(), events.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    double cdf_diff = 0.0, best = 0.0;
    for (std::size_t i = 0; i < events.size();) {
        std::size_t j = i;
        while (j < events.size() && events[j].first == events[i].first) cdf_diff += events[j++].second;
        best = std::max(best, std::abs(cdf_diff));
        i = j;
    }
    return std::min(best, 1.0);
}

/// Largest pairwise distance between support points.
inline double diameter(const DiscreteMeasure& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j)
            best = std::max(best, squared_distance(m.point(i), m.point(j)));
    return std::sqrt(best);
}

inline double diameter(const std::vector<Point>& pts) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, squared_distance(pts[i], pts[j]));
    return std::sqrt(best);
}

}  // namespace stochot
