#pragma once

// Primal network simplex for the uncapacitated transportation problem on a
// complete bipartite graph. Block-search pivoting over a spanning tree stored
// with parent/thread/successor arrays and an artificial root.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <numeric>
#include <tuple>
#include <vector>

#include "stochot/core.hpp"

namespace stochot::detail {

class TransportSimplex {
public:
    using Cost = std::int64_t;
    using Flow = std::int64_t;
    using Arc = std::int64_t;

    struct Edge {
        int i;
        int j;
        Flow flow;
    };

    /// cost is row-major n x m; supply and demand are nonnegative with equal totals.
    TransportSimplex(int n, int m, std::vector<Cost> cost, const std::vector<Flow>& supply,
                     const std::vector<Flow>& demand)
        : n_(n), m_(m), node_num_(n + m), arc_num_(Arc(n) * m), cost_(std::move(cost)),
          state_(static_cast<std::size_t>(arc_num_), kLower) {
        const int all = node_num_ + 1;
        parent_.resize(all);
        pred_.resize(all);
        pred_dir_.resize(all);
        thread_.resize(all);
        rev_thread_.resize(all);
        succ_num_.resize(all);
        last_succ_.resize(all);
        pi_.resize(all);
        flow_.resize(all);
        art_forward_.resize(node_num_);

        Cost max_cost = 0;
        for (Cost c : cost_) max_cost = std::max(max_cost, c);
        art_cost_ = (max_cost + 1) * node_num_;

        root_ = node_num_;
        parent_[root_] = -1;
        pred_[root_] = -1;
        thread_[root_] = 0;
        rev_thread_[0] = root_;
        succ_num_[root_] = node_num_ + 1;
        last_succ_[root_] = root_ - 1;
        pi_[root_] = 0;
        flow_[root_] = 0;
        for (int u = 0; u < node_num_; ++u) {
            const Flow s = u < n_ ? supply[u] : -demand[u - n_];
            parent_[u] = root_;
            pred_[u] = arc_num_ + u;
            thread_[u] = u + 1;
            rev_thread_[u + 1] = u;
            succ_num_[u] = 1;
            last_succ_[u] = u;
            if (s >= 0) {
                pred_dir_[u] = kUp;
                pi_[u] = 0;
                art_forward_[u] = 1;
                flow_[u] = s;
            } else {
                pred_dir_[u] = kDown;
                pi_[u] = art_cost_;
                art_forward_[u] = 0;
                flow_[u] = -s;
            }
        }
        block_size_ = std::max<Arc>(static_cast<Arc>(std::sqrt(static_cast<double>(arc_num_))), 10);
    }

    /// Pivots until optimal. Throws NumericalError if the pivot budget runs out or
    /// flow remains on an artificial arc.
    void run(std::int64_t max_pivots = std::int64_t(1) << 40) {
        std::int64_t pivots = 0;
        while (find_entering_arc()) {
            if (++pivots > max_pivots) throw NumericalError("network simplex: pivot limit reached");
            find_join_node();
            find_leaving_arc();
            change_flow();
            update_tree_structure();
            update_potential();
        }
        for (int u = 0; u < node_num_; ++u)
            if (pred_[u] >= arc_num_ && flow_[u] != 0)
                throw NumericalError("network simplex: infeasible transportation problem");
    }

    std::vector<Edge> flows() const {
        std::vector<Edge> out;
        for (int u = 0; u < node_num_; ++u) {
            const Arc e = pred_[u];
            if (e < arc_num_ && flow_[u] > 0) out.push_back({int(e / m_), int(e % m_), flow_[u]});
        }
        return out;
    }

    /// Flows on the final basis tree recomputed from real-valued marginals, so the
    /// plan's marginals match a and b up to rounding rather than the integer quantum.
    /// Flows at or below kFlowNoise (float noise on degenerate arcs) are dropped.
    std::vector<std::tuple<int, int, double>> tree_flows(std::span<const double> a, std::span<const double> b) const {
        std::vector<int> order;
        order.reserve(static_cast<std::size_t>(node_num_));
        for (int u = thread_[root_]; u != root_; u = thread_[u]) order.push_back(u);
        std::vector<double> net(static_cast<std::size_t>(node_num_) + 1, 0.0);
        for (int u = 0; u < node_num_; ++u) net[u] = u < n_ ? a[u] : -b[u - n_];
        std::vector<std::tuple<int, int, double>> out;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int u = *it;
            const Arc e = pred_[u];
            if (e < arc_num_) {
                const double f = u < n_ ? net[u] : -net[u];
                if (f > kFlowNoise) out.emplace_back(int(e / m_), int(e % m_), f);
            }
            net[parent_[u]] += net[u];
        }
        return out;
    }

    static constexpr double kFlowNoise = 1e-14;

private:
    static constexpr signed char kTree = 0;
    static constexpr signed char kLower = 1;
    static constexpr int kUp = 1;
    static constexpr int kDown = -1;

    int source(Arc e) const {
        if (e < arc_num_) return int(e / m_);
        const int u = int(e - arc_num_);
        return art_forward_[u] ? u : root_;
    }
    int target(Arc e) const {
        if (e < arc_num_) return n_ + int(e % m_);
        const int u = int(e - arc_num_);
        return art_forward_[u] ? root_ : u;
    }
    Cost cost(Arc e) const {
        if (e < arc_num_) return cost_[static_cast<std::size_t>(e)];
        return art_forward_[e - arc_num_] ? 0 : art_cost_;
    }

    bool find_entering_arc() {
        Cost min = 0;
        Arc cnt = block_size_;
        Arc e = next_arc_;
        int i = int(e / m_), j = int(e % m_);
        auto scan = [&](Arc stop) -> bool {
            for (; e != stop; ++e) {
                const Cost c = state_[static_cast<std::size_t>(e)] *
                               (cost_[static_cast<std::size_t>(e)] + pi_[i] - pi_[n_ + j]);
                if (c < min) {
                    min = c;
                    in_arc_ = e;
                }
                if (++j == m_) {
                    j = 0;
                    ++i;
                }
                if (--cnt == 0) {
                    if (min < 0) {
                        ++e;
                        return true;
                    }
                    cnt = block_size_;
                }
            }
            return false;
        };
        if (scan(arc_num_)) {
            next_arc_ = e % arc_num_;
            return true;
        }
        e = 0;
        i = 0;
        j = 0;
        if (scan(next_arc_)) {
            next_arc_ = e % arc_num_;
            return true;
        }
        if (min >= 0) return false;
        next_arc_ = e % arc_num_;
        return true;
    }

    void find_join_node() {
        int u = source(in_arc_), v = target(in_arc_);
        while (u != v) {
            if (succ_num_[u] < succ_num_[v])
                u = parent_[u];
            else
                v = parent_[v];
        }
        join_ = u;
    }

    void find_leaving_arc() {
        // The entering arc is always at its lower bound, so flow is pushed source -> target.
        const int first = source(in_arc_), second = target(in_arc_);
        constexpr Flow kInf = std::numeric_limits<Flow>::max();
        delta_ = kInf;
        int result = 0;
        for (int u = first; u != join_; u = parent_[u]) {
            const Flow d = pred_dir_[u] == kUp ? flow_[u] : kInf;
            if (d < delta_) {
                delta_ = d;
                u_out_ = u;
                result = 1;
            }
        }
        for (int u = second; u != join_; u = parent_[u]) {
            const Flow d = pred_dir_[u] == kDown ? flow_[u] : kInf;
            if (d <= delta_) {
                delta_ = d;
                u_out_ = u;
                result = 2;
            }
        }
        if (result == 0) throw NumericalError("network simplex: unbounded cycle");
        if (result == 1) {
            u_in_ = first;
            v_in_ = second;
        } else {
            u_in_ = second;
            v_in_ = first;
        }
    }

    void change_flow() {
        in_flow_ = delta_;
        if (delta_ > 0) {
            for (int u = source(in_arc_); u != join_; u = parent_[u]) flow_[u] -= pred_dir_[u] * delta_;
            for (int u = target(in_arc_); u != join_; u = parent_[u]) flow_[u] += pred_dir_[u] * delta_;
        }
        state_[static_cast<std::size_t>(in_arc_)] = kTree;
        const Arc out = pred_[u_out_];
        if (out < arc_num_) state_[static_cast<std::size_t>(out)] = kLower;
    }

    void update_tree_structure() {
        const int old_rev_thread = rev_thread_[u_out_];
        const int old_succ_num = succ_num_[u_out_];
        const int old_last_succ = last_succ_[u_out_];
        v_out_ = parent_[u_out_];

        if (u_in_ == u_out_) {
            parent_[u_in_] = v_in_;
            pred_[u_in_] = in_arc_;
            pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kUp : kDown;
            flow_[u_in_] = in_flow_;
            if (thread_[v_in_] != u_out_) {
                int after = thread_[old_last_succ];
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
                after = thread_[v_in_];
                thread_[v_in_] = u_out_;
                rev_thread_[u_out_] = v_in_;
                thread_[old_last_succ] = after;
                rev_thread_[after] = old_last_succ;
            }
        } else {
            const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

            int stem = u_in_;
            int par_stem = v_in_;
            int last = last_succ_[u_in_];
            int after = thread_[last];
            thread_[v_in_] = u_in_;
            dirty_revs_.clear();
            dirty_revs_.push_back(v_in_);
            while (stem != u_out_) {
                const int next_stem = parent_[stem];
                thread_[last] = next_stem;
                dirty_revs_.push_back(last);

                const int before = rev_thread_[stem];
                thread_[before] = after;
                rev_thread_[after] = before;

                parent_[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
                after = thread_[last];
            }
            parent_[u_out_] = par_stem;
            thread_[last] = thread_continue;
            rev_thread_[thread_continue] = last;
            last_succ_[u_out_] = last;

            if (old_rev_thread != v_in_) {
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
            }

            for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

            int tmp_sc = 0;
            const int tmp_ls = last_succ_[u_out_];
            for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
                pred_[u] = pred_[p];
                flow_[u] = flow_[p];
                pred_dir_[u] = -pred_dir_[p];
                tmp_sc += succ_num_[u] - succ_num_[p];
                succ_num_[u] = tmp_sc;
                last_succ_[p] = tmp_ls;
            }
            pred_[u_in_] = in_arc_;
            flow_[u_in_] = in_flow_;
            pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kUp : kDown;
            succ_num_[u_in_] = old_succ_num;
        }

        const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
        const int last_succ_out = last_succ_[u_out_];
        for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

        if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
            for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = old_rev_thread;
        } else if (last_succ_out != old_last_succ) {
            for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = last_succ_out;
        }

        for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
        for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
    }

    void update_potential() {
        const Cost sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost(in_arc_);
        const int end = thread_[last_succ_[u_in_]];
        for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
    }

    int n_, m_, node_num_;
    Arc arc_num_;
    std::vector<Cost> cost_;
    std::vector<signed char> state_;
    std::vector<int> parent_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_;
    std::vector<Arc> pred_;
    std::vector<Cost> pi_;
    std::vector<Flow> flow_;  // flow on pred_[u]; non-tree arcs carry none
    std::vector<unsigned char> art_forward_;
    std::vector<int> dirty_revs_;
    int root_ = 0;
    Cost art_cost_ = 0;
    Arc block_size_ = 10, next_arc_ = 0, in_arc_ = 0;
    int join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
    Flow delta_ = 0, in_flow_ = 0;
};

/// Integer masses summing exactly to `total`, by largest remainder.
inline std::vector<std::int64_t> scale_masses(std::span<const double> w, std::int64_t total) {
    double wsum = 0.0;
    for (double v : w) wsum += v;
    if (!(wsum > 0.0)) throw NumericalError("transport: zero total mass");
    std::vector<std::int64_t> out(w.size());
    std::vector<double> frac(w.size());
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double x = w[i] / wsum * static_cast<double>(total);
        const double f = std::floor(x);
        out[i] = static_cast<std::int64_t>(f);
        frac[i] = x - f;
        sum += out[i];
    }
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    std::int64_t left = total - sum;
    if (left < 0 || left > static_cast<std::int64_t>(w.size())) throw NumericalError("transport: mass scaling failed");
    for (std::size_t k = 0; left > 0; ++k, --left) ++out[order[k]];
    return out;
}

inline std::int64_t flow_scale(std::size_t n, std::size_t m) {
    constexpr std::int64_t kMax = std::int64_t(1) << 50;
    const auto l = std::lcm(static_cast<std::int64_t>(n), static_cast<std::int64_t>(m));
    if (l <= (std::int64_t(1) << 20)) return (kMax / l) * l;
    return kMax;
}

struct FlowEntry {
    std::size_t i;
    std::size_t j;
    double mass;
};

/// Solves min Σ c_ij π_ij over couplings of (a, b). Costs are scaled so the largest
/// maps to 2^40 and rounded to integers; masses are scaled to a common integer total to
/// find the optimal basis, whose flows are then recomputed from the real masses.
inline std::vector<FlowEntry> solve_transport(std::size_t n, std::size_t m, std::span<const double> cost,
                                              std::span<const double> a, std::span<const double> b) {
    require(cost.size() == n * m && a.size() == n && b.size() == m, "solve_transport: shape mismatch");
    double max_c = 0.0;
    for (double c : cost) {
        if (!std::isfinite(c) || c < 0.0) throw NumericalError("solve_transport: invalid cost entry");
        max_c = std::max(max_c, c);
    }
    const double scale = max_c > 0.0 ? std::ldexp(1.0, 40) / max_c : 0.0;
    std::vector<std::int64_t> ic(cost.size());
    for (std::size_t k = 0; k < cost.size(); ++k) ic[k] = std::llround(cost[k] * scale);

    const std::int64_t total = flow_scale(n, m);
    auto sa = scale_masses(a, total);
    auto sb = scale_masses(b, total);

    TransportSimplex ns(int(n), int(m), std::move(ic), sa, sb);
    ns.run();
    std::vector<FlowEntry> out;
    for (const auto& [i, j, f] : ns.tree_flows(a, b)) out.push_back({std::size_t(i), std::size_t(j), f});
    return out;
}

}  // namespace stochot::detail
