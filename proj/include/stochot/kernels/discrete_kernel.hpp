#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "stochot/measures.hpp"
#include "stochot/ot/plan.hpp"

namespace stochot {

/// Row-stochastic conditional distributions from source points to target points.
class DiscreteKernel {
public:
    using Row = std::vector<std::pair<std::size_t, double>>;

    DiscreteKernel() = default;

    /// Rows are normalized; a row with zero mass becomes uniform and is flagged.
    /// source_weights only matter when source points repeat: the kernel at a
    /// repeated coordinate is the weight-averaged mixture of its rows.
    DiscreteKernel(std::vector<Point> source, std::vector<Point> target, std::vector<Row> rows,
                   std::vector<double> source_weights = {})
        : source_(std::move(source)), target_(std::move(target)), rows_(std::move(rows)),
          source_weights_(std::move(source_weights)) {
        require(!source_.empty() && !target_.empty(), "kernel: empty support");
        require(rows_.size() == source_.size(), "kernel: row count must equal source count");
        dim_in_ = source_.front().size();
        dim_out_ = target_.front().size();
        for (const auto& s : source_) require(s.size() == dim_in_, "kernel: source dimension mismatch");
        for (const auto& t : target_) require(t.size() == dim_out_, "kernel: target dimension mismatch");
        if (source_weights_.empty()) source_weights_.assign(source_.size(), 1.0);
        require(source_weights_.size() == source_.size(), "kernel: source weight count mismatch");
        flagged_.assign(rows_.size(), false);
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            auto& row = rows_[i];
            std::erase_if(row, [](const auto& e) { return !(e.second > 0.0); });
            double s = 0.0;
            for (const auto& [j, w] : row) {
                require(j < target_.size(), "kernel: target index out of range");
                s += w;
            }
            if (s <= 0.0) {
                row.clear();
                for (std::size_t j = 0; j < target_.size(); ++j)
                    row.emplace_back(j, 1.0 / static_cast<double>(target_.size()));
                flagged_[i] = true;
            } else if (std::abs(s - 1.0) > 1e-12) {
                // rows already normalized to rounding are kept bit-exact
                for (auto& e : row) e.second /= s;
            }
        }
        for (std::size_t i = 0; i < source_.size(); ++i) index_[detail::atom_key(source_[i])].push_back(i);
    }

    std::size_t dim_in() const { return dim_in_; }
    std::size_t dim_out() const { return dim_out_; }
    const std::vector<Point>& source_points() const { return source_; }
    const std::vector<Point>& target_points() const { return target_; }
    const std::vector<Row>& rows() const { return rows_; }
    const Row& row(std::size_t i) const { return rows_[i]; }
    const std::vector<double>& source_weights() const { return source_weights_; }
    bool flagged(std::size_t i) const { return flagged_[i]; }
    std::size_t flagged_count() const { return static_cast<std::size_t>(std::count(flagged_.begin(), flagged_.end(), true)); }

    bool contains(PointView x) const { return index_.count(detail::atom_key(x)) > 0; }

    /// Conditional distribution at x as (target index, probability). x must be a source point.
    Row row_at(PointView x) const {
        auto it = index_.find(detail::atom_key(x));
        require(it != index_.end(), "kernel: point outside the kernel's source support");
        const auto& ids = it->second;
        if (ids.size() == 1) return rows_[ids.front()];
        double wsum = 0.0;
        for (auto i : ids) wsum += source_weights_[i];
        std::map<std::size_t, double> acc;
        for (auto i : ids) {
            const double w = wsum > 0.0 ? source_weights_[i] / wsum : 1.0 / static_cast<double>(ids.size());
            for (const auto& [j, q] : rows_[i]) acc[j] += w * q;
        }
        return {acc.begin(), acc.end()};
    }

private:
    std::size_t dim_in_ = 0, dim_out_ = 0;
    std::vector<Point> source_, target_;
    std::vector<Row> rows_;
    std::vector<double> source_weights_;
    std::vector<bool> flagged_;
    std::map<detail::AtomKey, std::vector<std::size_t>> index_;
};

/// Disintegration of a plan: row i is the plan's row i divided by the source weight.
inline DiscreteKernel kernel_from_plan(const TransportPlan& plan) {
    std::vector<DiscreteKernel::Row> rows(plan.source.size());
    for (const auto& e : plan.entries) rows[e.i].emplace_back(e.j, e.mass);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double w = plan.source.weight(i);
        if (w > 0.0)
            for (auto& [j, q] : rows[i]) q /= w;
        else
            rows[i].clear();
    }
    std::vector<double> sw(plan.source.weights().begin(), plan.source.weights().end());
    return DiscreteKernel(plan.source.points(), plan.target.points(), std::move(rows), std::move(sw));
}

/// Row i = δ_{x_i}.
inline DiscreteKernel identity_kernel(const DiscreteMeasure& mu) {
    std::vector<DiscreteKernel::Row> rows(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) rows[i] = {{i, 1.0}};
    auto pts = mu.points();
    return DiscreteKernel(pts, pts, std::move(rows));
}

}  // namespace stochot
