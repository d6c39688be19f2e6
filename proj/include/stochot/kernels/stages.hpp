#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochot/estimators/partition.hpp"
#include "stochot/kernels/discrete_kernel.hpp"
#include "stochot/measures.hpp"

namespace stochot {

/// Finite conditional distribution: (point, probability) pairs.
using Cloud = std::vector<std::pair<Point, double>>;

/// Pure map x -> T(x). The concrete kinds serialize; Function does not.
struct DeterministicMap {
    enum class Kind { Table, Affine, Constant, OrthantShift, Function };

    struct TableData {
        std::vector<Point> keys, values;
        std::map<detail::AtomKey, std::size_t> index;  // first occurrence wins
    };

    Kind kind = Kind::Constant;
    std::string note;  // declared codomain, free text
    std::shared_ptr<const TableData> table;
    std::vector<double> matrix;  // row-major, out_dim x in_dim
    std::size_t in_dim = 0, out_dim = 0;
    Point offset;  // affine translation, or the constant value
    double shift = 1.0;
    std::function<Point(PointView)> fn;

    static DeterministicMap from_table(std::vector<Point> keys, std::vector<Point> values, std::string note = {}) {
        require(keys.size() == values.size() && !keys.empty(), "table map: keys and values must match");
        auto t = std::make_shared<TableData>();
        for (std::size_t k = 0; k < keys.size(); ++k) t->index.try_emplace(detail::atom_key(keys[k]), k);
        t->keys = std::move(keys);
        t->values = std::move(values);
        DeterministicMap m;
        m.kind = Kind::Table;
        m.table = std::move(t);
        m.note = std::move(note);
        return m;
    }
    static DeterministicMap affine(std::vector<double> A, std::size_t out_dim, std::size_t in_dim, Point b) {
        require(A.size() == out_dim * in_dim && b.size() == out_dim, "affine map: shape mismatch");
        DeterministicMap m;
        m.kind = Kind::Affine;
        m.matrix = std::move(A);
        m.out_dim = out_dim;
        m.in_dim = in_dim;
        m.offset = std::move(b);
        return m;
    }
    static DeterministicMap translation(Point v) {
        const std::size_t d = v.size();
        std::vector<double> I(d * d, 0.0);
        for (std::size_t k = 0; k < d; ++k) I[k * d + k] = 1.0;
        return affine(std::move(I), d, d, std::move(v));
    }
    static DeterministicMap identity(std::size_t d) { return translation(Point(d, 0.0)); }
    static DeterministicMap constant(Point c) {
        DeterministicMap m;
        m.kind = Kind::Constant;
        m.offset = std::move(c);
        return m;
    }
    /// x + s·sign(x), coordinatewise, with sign(0) = 0.
    static DeterministicMap orthant_shift(double s = 1.0) {
        DeterministicMap m;
        m.kind = Kind::OrthantShift;
        m.shift = s;
        return m;
    }
    static DeterministicMap function(std::function<Point(PointView)> f, std::string note = {}) {
        DeterministicMap m;
        m.kind = Kind::Function;
        m.fn = std::move(f);
        m.note = std::move(note);
        return m;
    }

    Point apply(PointView x) const {
        switch (kind) {
            case Kind::Table: {
                auto it = table->index.find(detail::atom_key(x));
                require(it != table->index.end(), "table map: point not in the table's domain");
                return table->values[it->second];
            }
            case Kind::Affine: {
                require(x.size() == in_dim, "affine map: dimension mismatch");
                Point y = offset;
                for (std::size_t r = 0; r < out_dim; ++r)
                    for (std::size_t c = 0; c < in_dim; ++c) y[r] += matrix[r * in_dim + c] * x[c];
                return y;
            }
            case Kind::Constant:
                return offset;
            case Kind::OrthantShift: {
                Point y(x.begin(), x.end());
                for (double& v : y) v += shift * static_cast<double>((v > 0.0) - (v < 0.0));
                return y;
            }
            case Kind::Function:
                return fn(x);
        }
        return {};
    }

    /// Operator 2-norm of the linear part (Affine only), by power iteration on AᵀA.
    double lipschitz_constant() const {
        require(kind == Kind::Affine, "lipschitz_constant: affine maps only");
        Point v(in_dim, 1.0);
        double lambda = 0.0;
        for (int it = 0; it < 500; ++it) {
            Point Av(out_dim, 0.0), w(in_dim, 0.0);
            for (std::size_t r = 0; r < out_dim; ++r)
                for (std::size_t c = 0; c < in_dim; ++c) Av[r] += matrix[r * in_dim + c] * v[c];
            for (std::size_t r = 0; r < out_dim; ++r)
                for (std::size_t c = 0; c < in_dim; ++c) w[c] += matrix[r * in_dim + c] * Av[r];
            const double nw = norm(w);
            if (nw == 0.0) return 0.0;
            lambda = nw / std::max(norm(v), 1e-300);
            for (std::size_t c = 0; c < in_dim; ++c) v[c] = w[c] / nw;
        }
        return std::sqrt(lambda);
    }
};

/// x -> nearest anchor (Euclidean); ties go to the lowest index.
struct NearestLookup {
    std::size_t dim = 0;
    std::shared_ptr<const std::vector<double>> anchors;  // row-major

    static NearestLookup over(const std::vector<Point>& pts) {
        require(!pts.empty(), "nearest lookup: empty anchor set");
        auto a = std::make_shared<std::vector<double>>();
        const std::size_t d = pts.front().size();
        for (const auto& p : pts) {
            require(p.size() == d, "nearest lookup: dimension mismatch");
            a->insert(a->end(), p.begin(), p.end());
        }
        return {d, std::move(a)};
    }
    std::size_t size() const { return anchors->size() / dim; }
    PointView anchor(std::size_t k) const { return {anchors->data() + k * dim, dim}; }

    std::size_t nearest_index(PointView x) const {
        require(x.size() == dim, "nearest lookup: dimension mismatch");
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < size(); ++k) {
            const double dd = squared_distance(x, anchor(k));
            if (dd < best_d) {
                best_d = dd;
                best = k;
            }
        }
        return best;
    }
    Point apply(PointView x) const {
        auto a = anchor(nearest_index(x));
        return {a.begin(), a.end()};
    }
};

/// x -> N(x, σ² I).
struct GaussianConvolution {
    double sigma = 1.0;
};

struct DiscreteKernelStage {
    std::shared_ptr<const DiscreteKernel> kernel;
};

struct RoundToPartition {
    std::shared_ptr<const Partition> partition;
};

/// Entropic conditional extended to all of R^d:
/// w_j(x) ∝ ν_j exp((g_j − ‖x − y_j‖^p)/τ).
struct SoftmaxStage {
    struct Data {
        std::size_t dim = 0;
        std::vector<Point> ys;
        std::vector<double> log_weights;  // log ν_j
        std::vector<double> g;
        double tau = 1.0;
        double p = 1.0;
    };
    std::shared_ptr<const Data> data;

    std::vector<double> weights(PointView x) const {
        const auto& D = *data;
        std::vector<double> logits(D.ys.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < D.ys.size(); ++j) {
            logits[j] = D.log_weights[j] + (D.g[j] - powered_distance(x, D.ys[j], D.p)) / D.tau;
            mx = std::max(mx, logits[j]);
        }
        double s = 0.0;
        for (double& l : logits) s += (l = std::exp(l - mx));
        for (double& l : logits) l /= s;
        return logits;
    }
};

/// One-dimensional CDF kernel G^{-1} ∘ F̃: at a source atom with CDF jump (a, b]
/// the output spreads over the target quantiles in (a, b]; elsewhere it is G^{-1}(F(x)).
struct Quantile1DStage {
    struct Data {
        std::vector<double> xs;      // sorted unique source atoms
        std::vector<double> x_cdf;   // F at each atom
        std::vector<double> ys;      // sorted target atoms (duplicates kept)
        std::vector<double> y_cdf;   // G at each target atom, last = 1
    };
    std::shared_ptr<const Data> data;

    static Quantile1DStage from_measures(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
        require(mu.dim() == 1 && nu.dim() == 1, "quantile stage: measures must be one-dimensional");
        auto D = std::make_shared<Data>();
        std::vector<std::pair<double, double>> a, b;
        for (std::size_t i = 0; i < mu.size(); ++i) a.emplace_back(mu.point(i)[0], mu.weight(i));
        for (std::size_t j = 0; j < nu.size(); ++j) b.emplace_back(nu.point(j)[0], nu.weight(j));
        auto by_x = [](const auto& l, const auto& r) { return l.first < r.first; };
        std::stable_sort(a.begin(), a.end(), by_x);
        std::stable_sort(b.begin(), b.end(), by_x);
        double s = 0.0;
        for (const auto& [x, w] : a) {
            s += w;
            if (!D->xs.empty() && D->xs.back() == x)
                D->x_cdf.back() = s;
            else {
                D->xs.push_back(x);
                D->x_cdf.push_back(s);
            }
        }
        D->x_cdf.back() = 1.0;
        s = 0.0;
        for (const auto& [y, w] : b) {
            D->ys.push_back(y);
            D->y_cdf.push_back(s += w);
        }
        D->y_cdf.back() = 1.0;
        return {std::move(D)};
    }

    /// (target atom value, probability), sorted by value.
    std::vector<std::pair<double, double>> row(double x) const {
        const auto& D = *data;
        constexpr double kTol = 1e-12;
        auto it = std::lower_bound(D.xs.begin(), D.xs.end(), x);
        const std::size_t k = static_cast<std::size_t>(it - D.xs.begin());
        std::vector<std::pair<double, double>> out;
        if (it != D.xs.end() && *it == x) {
            const double lo = k == 0 ? 0.0 : D.x_cdf[k - 1], hi = D.x_cdf[k];
            const double len = hi - lo;
            double total = 0.0;
            for (std::size_t j = 0; j < D.ys.size(); ++j) {
                const double a = j == 0 ? 0.0 : D.y_cdf[j - 1], b = D.y_cdf[j];
                const double ov = std::min(hi, b) - std::max(lo, a);
                if (ov > kTol * std::max(len, 1e-300) && ov > 0.0) {
                    out.emplace_back(D.ys[j], ov);
                    total += ov;
                }
            }
            if (total > 0.0) {
                for (auto& e : out) e.second /= total;
                return out;
            }
            out.clear();
        }
        const double u = k == 0 ? 0.0 : D.x_cdf[k - 1];
        std::size_t j = 0;
        while (j + 1 < D.ys.size() && D.y_cdf[j] < u - kTol) ++j;
        out.emplace_back(D.ys[j], 1.0);
        return out;
    }
};

using Stage = std::variant<DeterministicMap, NearestLookup, GaussianConvolution, DiscreteKernelStage,
                           RoundToPartition, SoftmaxStage, Quantile1DStage>;

inline bool is_continuous_stochastic(const Stage& s) { return std::holds_alternative<GaussianConvolution>(s); }

inline std::string stage_name(const Stage& s) {
    return std::visit(
        [](const auto& st) -> std::string {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, DeterministicMap>) return "deterministic_map";
            else if constexpr (std::is_same_v<T, NearestLookup>) return "nearest_lookup";
            else if constexpr (std::is_same_v<T, GaussianConvolution>) return "gaussian_convolution";
            else if constexpr (std::is_same_v<T, DiscreteKernelStage>) return "discrete_kernel";
            else if constexpr (std::is_same_v<T, RoundToPartition>) return "round_to_partition";
            else if constexpr (std::is_same_v<T, SoftmaxStage>) return "softmax";
            else return "quantile_1d";
        },
        s);
}

/// Exact output distribution of a finite-output stage at x.
inline Cloud stage_distribution(const Stage& s, PointView x) {
    return std::visit(
        [&](const auto& st) -> Cloud {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, DeterministicMap>) {
                return {{st.apply(x), 1.0}};
            } else if constexpr (std::is_same_v<T, NearestLookup>) {
                return {{st.apply(x), 1.0}};
            } else if constexpr (std::is_same_v<T, GaussianConvolution>) {
                throw InvalidArgument("gaussian stage has no finite output distribution");
            } else if constexpr (std::is_same_v<T, DiscreteKernelStage>) {
                Cloud out;
                for (const auto& [j, q] : st.kernel->row_at(x)) out.emplace_back(st.kernel->target_points()[j], q);
                return out;
            } else if constexpr (std::is_same_v<T, RoundToPartition>) {
                return {{st.partition->round_point(x), 1.0}};
            } else if constexpr (std::is_same_v<T, SoftmaxStage>) {
                const auto w = st.weights(x);
                Cloud out;
                for (std::size_t j = 0; j < w.size(); ++j)
                    if (w[j] > 0.0) out.emplace_back(st.data->ys[j], w[j]);
                return out;
            } else {
                require(x.size() == 1, "quantile stage: input must be one-dimensional");
                Cloud out;
                for (const auto& [y, q] : st.row(x[0])) out.emplace_back(Point{y}, q);
                return out;
            }
        },
        s);
}

}  // namespace stochot
