#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stochot/core.hpp"
#include "stochot/measures.hpp"

namespace stochot {

/// Dense |X| x |Y| matrix of ‖x_i − y_j‖^p, row-major.
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double p)
        : rows_(rows), cols_(cols), p_(p), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double p() const { return p_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const std::vector<double>& data() const { return data_; }
    double max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

private:
    std::size_t rows_ = 0, cols_ = 0;
    double p_ = 1.0;
    std::vector<double> data_;
};

inline CostMatrix cost_matrix_flat(std::size_t d, std::span<const double> xs, std::span<const double> ys, double p) {
    require(p >= 1.0 && std::isfinite(p), "cost_matrix: p must be a finite real >= 1");
    const std::size_t n = xs.size() / d, m = ys.size() / d;
    CostMatrix c(n, m, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            c(i, j) = powered_distance(xs.subspan(i * d, d), ys.subspan(j * d, d), p);
    return c;
}

inline CostMatrix cost_matrix(const std::vector<Point>& xs, const std::vector<Point>& ys, double p) {
    require(!xs.empty() && !ys.empty(), "cost_matrix: empty point list");
    const std::size_t d = xs.front().size();
    std::vector<double> fx, fy;
    for (const auto& x : xs) {
        require(x.size() == d, "cost_matrix: dimension mismatch");
        fx.insert(fx.end(), x.begin(), x.end());
    }
    for (const auto& y : ys) {
        require(y.size() == d, "cost_matrix: dimension mismatch");
        fy.insert(fy.end(), y.begin(), y.end());
    }
    return cost_matrix_flat(d, fx, fy, p);
}

inline CostMatrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    require(mu.dim() == nu.dim(), "cost_matrix: dimension mismatch");
    return cost_matrix_flat(mu.dim(), mu.coords(), nu.coords(), p);
}

struct PlanEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    double mass = 0.0;
};

/// Sparse coupling between two discrete measures. Entries are sorted by (i, j).
struct TransportPlan {
    DiscreteMeasure source;
    DiscreteMeasure target;
    std::vector<PlanEntry> entries;
    double cost_value = 0.0;
    double p = 1.0;

    std::vector<double> row_sums() const {
        std::vector<double> r(source.size(), 0.0);
        for (const auto& e : entries) r[e.i] += e.mass;
        return r;
    }
    std::vector<double> col_sums() const {
        std::vector<double> c(target.size(), 0.0);
        for (const auto& e : entries) c[e.j] += e.mass;
        return c;
    }
    double total_mass() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.mass;
        return s;
    }
    /// Largest absolute marginal violation over rows and columns.
    double marginal_violation() const {
        double v = 0.0;
        auto r = row_sums();
        for (std::size_t i = 0; i < r.size(); ++i) v = std::max(v, std::abs(r[i] - source.weight(i)));
        auto c = col_sums();
        for (std::size_t j = 0; j < c.size(); ++j) v = std::max(v, std::abs(c[j] - target.weight(j)));
        return v;
    }
};

/// Sorts entries, drops zeros and recomputes cost_value from the exact point coordinates.
inline TransportPlan finalize_plan(DiscreteMeasure source, DiscreteMeasure target,
                                   std::vector<PlanEntry> entries, double p) {
    std::erase_if(entries, [](const PlanEntry& e) { return !(e.mass > 0.0); });
    std::sort(entries.begin(), entries.end(),
              [](const PlanEntry& a, const PlanEntry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    TransportPlan plan{std::move(source), std::move(target), std::move(entries), 0.0, p};
    double cost = 0.0;
    for (const auto& e : plan.entries)
        cost += e.mass * powered_distance(plan.source.point(e.i), plan.target.point(e.j), p);
    plan.cost_value = cost;
    return plan;
}

}  // namespace stochot
