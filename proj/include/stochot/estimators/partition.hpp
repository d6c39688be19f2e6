#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <variant>
#include <vector>

#include "stochot/core.hpp"

namespace stochot {

/// Half-open cubes [k r, (k+1) r)^d shifted by `offset`.
struct CubicPartition {
    double r = 1.0;
    Point offset;
};

/// Dyadic shells 2^i B \ 2^{i-1} B (shell 0 is the unit ball), each split into
/// Voronoi cells of the dilated base anchors 2^i a.
struct ShellPartition {
    double delta = 0.25;
    std::size_t dim = 1;
    std::vector<double> anchors;  // row-major, a 3δ-covering of the unit ball
    int shell_count_cap = 64;  // beyond this shell the outermost one is extended outward

    std::size_t anchor_count() const { return anchors.size() / dim; }
    PointView anchor(std::size_t k) const { return {anchors.data() + k * dim, dim}; }
};

namespace detail {

inline double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

inline unsigned nth_prime(std::size_t k) {
    static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                          43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
    require(k < std::size(primes), "halton: dimension too large");
    return primes[k];
}

}  // namespace detail

/// Greedy farthest-point covering of the unit ball. Candidates are Halton points
/// inside the ball; the origin is the first anchor. Stops once every candidate is
/// within 3δ of an anchor. Throws if more than δ^{-d} anchors would be needed.
inline std::vector<double> unit_ball_covering(std::size_t d, double delta, std::size_t candidates = 0) {
    require(d >= 1, "covering: dimension must be positive");
    require(delta > 0.0, "covering: delta must be positive");
    const double cap = std::pow(delta, -static_cast<double>(d));
    if (candidates == 0)
        candidates = static_cast<std::size_t>(std::clamp(40.0 * std::max(cap, 1.0), 4096.0, 200000.0));

    std::vector<double> cand;
    cand.reserve(candidates * d);
    std::size_t got = 0;
    for (std::uint64_t idx = 1; got < candidates; ++idx) {
        Point x(d);
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = 2.0 * detail::radical_inverse(idx, detail::nth_prime(k)) - 1.0;
            sq += x[k] * x[k];
        }
        if (sq <= 1.0) {
            cand.insert(cand.end(), x.begin(), x.end());
            ++got;
        }
    }

    std::vector<double> anchors(d, 0.0);
    std::vector<double> dist(candidates);
    const PointView origin(anchors.data(), d);
    for (std::size_t c = 0; c < candidates; ++c) dist[c] = distance({cand.data() + c * d, d}, origin);
    const double target = 3.0 * delta;
    while (true) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        if (dist[far] <= target) break;
        if (static_cast<double>(anchors.size() / d + 1) > std::max(cap, 1.0))
            throw NumericalError("covering: anchor count exceeds delta^{-d}");
        const PointView a(cand.data() + far * d, d);
        anchors.insert(anchors.end(), a.begin(), a.end());
        const PointView na(anchors.data() + anchors.size() - d, d);
        for (std::size_t c = 0; c < candidates; ++c)
            dist[c] = std::min(dist[c], distance({cand.data() + c * d, d}, na));
    }
    return anchors;
}

inline ShellPartition make_shell_partition(std::size_t d, double delta) {
    ShellPartition s;
    s.delta = delta;
    s.dim = d;
    s.anchors = unit_ball_covering(d, delta);
    return s;
}

class Partition {
public:
    Partition() = default;
    Partition(CubicPartition c) : impl_(std::move(c)) {}
    Partition(ShellPartition s) : impl_(std::move(s)) {}

    bool is_cubic() const { return std::holds_alternative<CubicPartition>(impl_); }
    const CubicPartition& cubic() const { return std::get<CubicPartition>(impl_); }
    const ShellPartition& shell() const { return std::get<ShellPartition>(impl_); }

    /// Index of the dyadic shell containing x (0 for the unit ball).
    static int shell_index(PointView x) {
        const double r = norm(x);
        if (r <= 1.0) return 0;
        int i = static_cast<int>(std::ceil(std::log2(r)));
        while (std::ldexp(1.0, i) < r) ++i;
        while (i > 1 && std::ldexp(1.0, i - 1) >= r) --i;
        return i;
    }

    /// Center of the cell containing x.
    Point round_point(PointView x) const {
        if (auto c = std::get_if<CubicPartition>(&impl_)) {
            Point out(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double off = c->offset.empty() ? 0.0 : c->offset[k];
                const double cell = std::floor((x[k] - off) / c->r);
                out[k] = off + (cell + 0.5) * c->r;
            }
            return out;
        }
        const auto& s = std::get<ShellPartition>(impl_);
        require(x.size() == s.dim, "round_point: dimension mismatch");
        const int i = std::min(shell_index(x), s.shell_count_cap);
        const double scale = std::ldexp(1.0, i);
        Point y(x.begin(), x.end());
        for (double& v : y) v /= scale;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < s.anchor_count(); ++k) {
            const double dd = squared_distance(y, s.anchor(k));
            if (dd < best_d) {
                best_d = dd;
                best = k;
            }
        }
        Point out(s.anchor(best).begin(), s.anchor(best).end());
        for (double& v : out) v *= scale;
        return out;
    }

    /// Largest ‖round_point(x) − x‖ over the given points.
    double max_radius(const std::vector<Point>& xs) const {
        double r = 0.0;
        for (const auto& x : xs) r = std::max(r, distance(x, round_point(x)));
        return r;
    }

private:
    std::variant<CubicPartition, ShellPartition> impl_;
};

}  // namespace stochot
