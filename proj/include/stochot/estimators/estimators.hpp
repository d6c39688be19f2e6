#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stochot/estimators/partition.hpp"
#include "stochot/kernels/discrete_kernel.hpp"
#include "stochot/kernels/pipeline.hpp"
#include "stochot/measures.hpp"
#include "stochot/ot/exact.hpp"
#include "stochot/ot/sinkhorn.hpp"
#include "stochot/rng.hpp"

namespace stochot {

enum class SolverMode { Auto, Exact, Sinkhorn };

inline std::string to_string(SolverMode m) {
    switch (m) {
        case SolverMode::Exact: return "exact";
        case SolverMode::Sinkhorn: return "sinkhorn";
        default: return "auto";
    }
}

inline SolverMode parse_solver_mode(const std::string& s) {
    if (s == "auto") return SolverMode::Auto;
    if (s == "exact") return SolverMode::Exact;
    if (s == "sinkhorn") return SolverMode::Sinkhorn;
    throw InvalidArgument("unknown solver mode '" + s + "'");
}

/// Estimator hyperparameters. Unset optionals resolve to the theorem defaults.
struct EstimatorConfig {
    double p = 1.0;
    std::optional<double> tau;        // entropic regularization
    std::optional<double> r;          // cubic cell side
    std::optional<double> delta;      // shell partition scale
    std::optional<double> delta_acc;  // preliminary OT accuracy
    std::optional<double> sigma;      // robust: Gaussian smoothing
    std::optional<std::size_t> m;     // robust: number of noisy draws
    std::optional<double> tau_acc;    // robust: preliminary OT accuracy
    double eps = 0.0;
    double rho = 0.0;
    SolverMode solver = SolverMode::Auto;
    std::size_t exact_cap = 2000;
    std::uint64_t seed = 0;
    bool check_support = true;  // enforce [0,1]^d where the construction assumes it
    SinkhornOptions sinkhorn;
};

/// A constructed kernel plus what went into it.
struct Estimate {
    KernelPipeline pipeline;
    std::vector<std::pair<std::string, std::string>> params;  // resolved hyperparameters
    bool flagged = false;
    std::string flag_reason;
    // preliminary discrete problem, when there is one
    std::optional<DiscreteMeasure> prelim_source, prelim_target;
    double prelim_cost = std::numeric_limits<double>::quiet_NaN();
    std::string solver_used;

    void set(const std::string& key, double v) { params.emplace_back(key, format_number(v)); }
    void set(const std::string& key, const std::string& v) { params.emplace_back(key, v); }
};

namespace detail {

inline void require_unit_cube(const std::vector<Point>& pts, const char* who) {
    for (const auto& x : pts)
        for (double v : x)
            require(v >= 0.0 && v <= 1.0, std::string(who) + ": samples must lie in [0,1]^d");
}

inline std::size_t common_dim(const std::vector<Point>& xs, const std::vector<Point>& ys) {
    require(!xs.empty() && !ys.empty(), "estimator: need at least one sample on each side");
    const std::size_t d = xs.front().size();
    for (const auto& x : xs) require(x.size() == d, "estimator: dimension mismatch");
    for (const auto& y : ys) require(y.size() == d, "estimator: dimension mismatch");
    return d;
}

/// Near-optimal plan for the preliminary problem: exact when allowed, otherwise
/// Sinkhorn at τ = acc / (2d log(n+1)) followed by feasibility rounding.
inline TransportPlan preliminary_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, double p, double acc,
                                      std::size_t n, const EstimatorConfig& cfg, Estimate& est) {
    const bool small = a.size() <= cfg.exact_cap && b.size() <= cfg.exact_cap;
    const bool exact = cfg.solver == SolverMode::Exact || (cfg.solver == SolverMode::Auto && small);
    if (exact) {
        est.solver_used = "exact";
        return exact_ot(a, b, p, {.support_cap = std::max<std::size_t>(cfg.exact_cap, 5000)});
    }
    const double d = static_cast<double>(a.dim());
    const double tau = acc / (2.0 * d * std::log(static_cast<double>(n) + 1.0));
    est.set("sinkhorn_tau", tau);
    // feasibility rounding adds at most 2·violation·max cost, so a marginal tolerance of
    // acc/(4·max cost) keeps the rounded plan within acc
    const auto cost = cost_matrix(a, b, p);
    const double cmax = std::max(*std::max_element(cost.data().begin(), cost.data().end()), 1e-300);
    SinkhornOptions opt = cfg.sinkhorn;
    opt.tol = std::max(opt.tol, acc / (4.0 * cmax));
    opt.tau_scaling = true;
    auto sol = sinkhorn(a, b, p, tau, opt);
    if (!sol.converged) {
        est.flagged = true;
        est.flag_reason = "sinkhorn did not reach tolerance";
    }
    est.solver_used = "sinkhorn";
    return std::move(sol.plan);
}

inline std::shared_ptr<const DiscreteKernel> share(DiscreteKernel k) {
    return std::make_shared<const DiscreteKernel>(std::move(k));
}

}  // namespace detail

/// κ̄ ∘ NearestLookup(occupied centers) ∘ RoundToPartition, where κ̄ disintegrates a
/// near-optimal plan from the rounded sample to the target sample.
inline Estimate rounding_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys, const Partition& part,
                                   const EstimatorConfig& cfg) {
    const std::size_t d = detail::common_dim(xs, ys);
    const double n = static_cast<double>(xs.size());
    const double p = cfg.p;
    Estimate est;
    const double acc = cfg.delta_acc.value_or(std::pow(n, -p / (static_cast<double>(d) + 2.0 * p)));
    est.set("p", p);
    est.set("delta_acc", acc);

    std::vector<Point> rounded;
    rounded.reserve(xs.size());
    for (const auto& x : xs) rounded.push_back(part.round_point(x));
    auto mu_r = aggregate_atoms(empirical(rounded));
    auto nu_n = aggregate_atoms(empirical(ys));
    auto plan = detail::preliminary_plan(mu_r, nu_n, p, acc, xs.size(), cfg, est);
    est.set("solver", est.solver_used);
    est.set("occupied_cells", static_cast<double>(mu_r.size()));
    est.prelim_cost = plan.cost_value;
    est.prelim_source = mu_r;
    est.prelim_target = nu_n;

    auto kbar = detail::share(kernel_from_plan(plan));
    est.pipeline = KernelPipeline({RoundToPartition{std::make_shared<const Partition>(part)},
                                   NearestLookup::over(mu_r.points()), DiscreteKernelStage{kbar}});
    return est;
}

inline Estimate rounding_cubic_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys,
                                         const EstimatorConfig& cfg) {
    const std::size_t d = detail::common_dim(xs, ys);
    const double n = static_cast<double>(xs.size());
    const double r = cfg.r.value_or(std::pow(n, -1.0 / (static_cast<double>(d) + 2.0 * cfg.p)));
    require(r > 0.0, "rounding: r must be positive");
    auto est = rounding_estimator(xs, ys, Partition(CubicPartition{r, Point(d, 0.0)}), cfg);
    est.set("r", r);
    return est;
}

inline Estimate rounding_shell_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys,
                                         const EstimatorConfig& cfg) {
    const std::size_t d = detail::common_dim(xs, ys);
    const double n = static_cast<double>(xs.size());
    const double delta = cfg.delta.value_or(std::pow(n, -1.0 / (static_cast<double>(d) + 2.0 * cfg.p)));
    require(delta > 0.0, "rounding: delta must be positive");
    auto shell = make_shell_partition(d, delta);
    const auto anchors = shell.anchor_count();
    auto est = rounding_estimator(xs, ys, Partition(std::move(shell)), cfg);
    est.set("delta", delta);
    est.set("anchors", static_cast<double>(anchors));
    return est;
}

/// Softmax extension of the entropic conditional: w_j(x) ∝ ν_j exp((g_j − ‖x − Y_j‖^p)/τ).
inline Estimate entropic_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys,
                                   const EstimatorConfig& cfg) {
    const std::size_t d = detail::common_dim(xs, ys);
    if (cfg.check_support) {
        detail::require_unit_cube(xs, "entropic_estimator");
        detail::require_unit_cube(ys, "entropic_estimator");
    }
    const double n = static_cast<double>(xs.size()), dd = static_cast<double>(d), p = cfg.p;
    double tau_default = std::pow(dd, p / 4.0) * std::pow(n, -1.0 / std::max(2.0 * dd, 4.0)) * std::log(n);
    if (!(tau_default > 0.0)) tau_default = std::pow(dd, p / 4.0);  // n = 1
    const double tau = cfg.tau.value_or(tau_default);
    require(tau > 0.0, "entropic_estimator: tau must be positive");
    Estimate est;
    est.set("p", p);
    est.set("tau", tau);
    auto mu = empirical(xs), nu = empirical(ys);
    auto sol = sinkhorn(mu, nu, p, tau, cfg.sinkhorn);
    if (!sol.converged) {
        est.flagged = true;
        est.flag_reason = "sinkhorn did not reach tolerance";
    }
    est.set("sinkhorn_iterations", static_cast<double>(sol.iterations));
    auto data = std::make_shared<SoftmaxStage::Data>();
    data->dim = d;
    data->ys = ys;
    data->log_weights.resize(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j) data->log_weights[j] = std::log(nu.weight(j));
    data->g = sol.g;
    data->tau = tau;
    data->p = p;
    est.solver_used = "sinkhorn";
    est.prelim_cost = sol.plan.cost_value;
    est.pipeline = KernelPipeline::of(SoftmaxStage{std::move(data)});
    return est;
}

/// Map each x to the image of its nearest source sample under the optimal W_1 assignment.
inline Estimate nn_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys) {
    detail::common_dim(xs, ys);
    require(xs.size() == ys.size(), "nn_estimator: sample counts must be equal");
    const std::size_t n = xs.size();
    auto plan = exact_ot(empirical(xs), empirical(ys), 1.0);
    Estimate est;
    est.set("p_assignment", 1.0);
    std::vector<std::size_t> best(n, 0);
    std::vector<double> best_mass(n, -1.0);
    std::vector<int> support(n, 0);
    for (const auto& e : plan.entries) {
        ++support[e.i];
        if (e.mass > best_mass[e.i] || (e.mass == best_mass[e.i] && e.j < best[e.i])) {
            best_mass[e.i] = e.mass;
            best[e.i] = e.j;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (support[i] != 1) {
            est.flagged = true;
            est.flag_reason = "assignment plan split mass; kept the largest column per row";
        }
    std::vector<Point> images(n);
    for (std::size_t i = 0; i < n; ++i) images[i] = ys[best[i]];
    est.solver_used = "exact";
    est.prelim_cost = plan.cost_value;
    est.pipeline = KernelPipeline({NearestLookup::over(xs), DeterministicMap::from_table(xs, images, "target sample")});
    return est;
}

/// One-dimensional CDF kernel built from the two empirical measures.
inline Estimate cdf_estimator_1d(const std::vector<Point>& xs, const std::vector<Point>& ys, double p) {
    const std::size_t d = detail::common_dim(xs, ys);
    require(d == 1, "cdf_estimator_1d: samples must be one-dimensional");
    Estimate est;
    est.set("p", p);
    est.pipeline = KernelPipeline::of(Quantile1DStage::from_measures(empirical(xs), empirical(ys)));
    return est;
}

/// Randomized-rounding robust estimator (p = 1): κ̄ ∘ NearestLookup(S) ∘ N^σ.
/// The lookup ranges over the atoms of S hit by the m noisy draws, which is where κ̄ is defined.
inline Estimate robust_conv_estimator(const std::vector<Point>& xs, const std::vector<Point>& ys, double eps,
                                      double rho, const EstimatorConfig& cfg) {
    require(cfg.p == 1.0, "robust_conv_estimator: only p = 1 is supported");
    require(eps >= 0.0 && eps <= 1.0 && rho >= 0.0, "robust_conv_estimator: invalid budget");
    const std::size_t d = detail::common_dim(xs, ys);
    if (cfg.check_support) detail::require_unit_cube(ys, "robust_conv_estimator");
    const double n = static_cast<double>(xs.size()), dd = static_cast<double>(d);
    const std::size_t m = cfg.m.value_or(xs.size() * xs.size());
    const double tau_acc = cfg.tau_acc.value_or(std::pow(n, -1.0 / (dd + 2.0)));
    const double sigma = cfg.sigma.value_or(std::pow(3.0, dd / (2.0 + dd)) * std::pow(n * dd, -1.0 / (dd + 2.0)) +
                                            std::sqrt(rho) * std::pow(dd, -0.25));
    require(sigma > 0.0 && m >= 1, "robust_conv_estimator: sigma and m must be positive");
    Estimate est;
    est.set("p", 1.0);
    est.set("eps", eps);
    est.set("rho", rho);
    est.set("m", static_cast<double>(m));
    est.set("tau_acc", tau_acc);
    est.set("sigma", sigma);

    const auto lookup_all = NearestLookup::over(xs);
    Rng rng = make_rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> count(xs.size(), 0.0);
    Point z(d);
    for (std::size_t s = 0; s < m; ++s) {
        const auto& x = xs[pick(rng)];
        for (std::size_t k = 0; k < d; ++k) z[k] = x[k] + sigma * normal(rng);
        count[lookup_all.nearest_index(z)] += 1.0;
    }
    // aggregate S' by multiplicity; repeated source coordinates share one atom
    std::vector<Point> hit;
    std::vector<double> w;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (count[i] > 0.0) {
            hit.push_back(xs[i]);
            w.push_back(count[i]);
        }
    auto s_prime = aggregate_atoms(make_discrete(hit, w));
    auto t_meas = aggregate_atoms(empirical(ys));
    auto plan = detail::preliminary_plan(s_prime, t_meas, 1.0, tau_acc, xs.size(), cfg, est);
    est.set("solver", est.solver_used);
    est.prelim_cost = plan.cost_value;
    est.prelim_source = s_prime;
    est.prelim_target = t_meas;
    auto kbar = detail::share(kernel_from_plan(plan));
    est.pipeline = KernelPipeline(
        {GaussianConvolution{sigma}, NearestLookup::over(s_prime.points()), DiscreteKernelStage{kbar}});
    return est;
}

/// κ_x ≡ δ_0.
inline Estimate null_estimator(std::size_t d) {
    require(d >= 1, "null_estimator: dimension must be positive");
    Estimate est;
    est.pipeline = KernelPipeline::of(DeterministicMap::constant(Point(d, 0.0)));
    return est;
}

inline const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names = {"entropic", "rounding-cubic", "rounding-shell", "nn",
                                                   "cdf1d",    "robust-conv",    "null"};
    return names;
}

/// Dispatch by CLI name.
inline Estimate build_estimator(const std::string& name, const std::vector<Point>& xs, const std::vector<Point>& ys,
                                const EstimatorConfig& cfg) {
    if (name == "entropic") return entropic_estimator(xs, ys, cfg);
    if (name == "rounding-cubic") return rounding_cubic_estimator(xs, ys, cfg);
    if (name == "rounding-shell") return rounding_shell_estimator(xs, ys, cfg);
    if (name == "nn") return nn_estimator(xs, ys);
    if (name == "cdf1d") return cdf_estimator_1d(xs, ys, cfg.p);
    if (name == "robust-conv") return robust_conv_estimator(xs, ys, cfg.eps, cfg.rho, cfg);
    if (name == "null") return null_estimator(xs.empty() ? 1 : xs.front().size());
    throw InvalidArgument("unknown estimator '" + name + "'");
}

}  // namespace stochot
