#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochot {

using Point = std::vector<double>;
using PointView = std::span<const double>;

/// Thrown when an input violates an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot produce a valid result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

inline double squared_distance(PointView a, PointView b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

inline double distance(PointView a, PointView b) { return std::sqrt(squared_distance(a, b)); }

inline double norm(PointView a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

/// ‖a − b‖^p. The single routine every cost computation goes through.
inline double powered_distance(PointView a, PointView b, double p) {
    const double sq = squared_distance(a, b);
    if (p == 2.0) return sq;
    const double r = std::sqrt(sq);
    if (p == 1.0) return r;
    return std::pow(r, p);
}

/// Shortest round-trip decimal form of v.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool all_finite(PointView a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace stochot
