#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stochot/measures.hpp"
#include "stochot/ot/plan.hpp"

namespace stochot {

/// Repairs a nonnegative n x m matrix (row-major) so that its marginals are exactly
/// (mu, nu): rows are scaled down, then columns, then the remaining deficit is added
/// as a rank-one correction.
inline TransportPlan round_plan_to_feasible(const std::vector<double>& raw, const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu, double p = 1.0) {
    const std::size_t n = mu.size(), m = nu.size();
    require(raw.size() == n * m, "round_plan_to_feasible: shape mismatch");
    double total = 0.0;
    for (double v : raw) {
        require(v >= 0.0 && std::isfinite(v), "round_plan_to_feasible: entries must be finite and nonnegative");
        total += v;
    }
    require(total > 0.0, "round_plan_to_feasible: zero total mass");

    std::vector<double> P = raw;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) r += P[i * m + j];
        if (r > mu.weight(i)) {
            const double x = mu.weight(i) / r;
            for (std::size_t j = 0; j < m; ++j) P[i * m + j] *= x;
        }
    }
    std::vector<double> col(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) col[j] += P[i * m + j];
    for (std::size_t j = 0; j < m; ++j) {
        if (col[j] > nu.weight(j)) {
            const double y = nu.weight(j) / col[j];
            for (std::size_t i = 0; i < n; ++i) P[i * m + j] *= y;
        }
    }
    std::vector<double> err_r(n), err_c(m);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) r += P[i * m + j];
        err_r[i] = std::max(mu.weight(i) - r, 0.0);
        l1 += err_r[i];
    }
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) col[j] += P[i * m + j];
    for (std::size_t j = 0; j < m; ++j) err_c[j] = std::max(nu.weight(j) - col[j], 0.0);
    if (l1 > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            if (err_r[i] > 0.0)
                for (std::size_t j = 0; j < m; ++j) P[i * m + j] += err_r[i] * err_c[j] / l1;

    std::vector<PlanEntry> entries;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (P[i * m + j] > 0.0) entries.push_back({i, j, P[i * m + j]});
    return finalize_plan(mu, nu, std::move(entries), p);
}

struct SinkhornOptions {
    double tol = 1e-7;
    std::size_t max_iter = 100000;
    /// Geometric warm start: solve at tau * 2^k, ..., tau, halving each stage.
    bool tau_scaling = false;
    std::size_t scaling_stages = 8;
    /// Record the dual objective after every iteration (costs one extra pass).
    bool record_dual = false;
};

struct EotSolution {
    TransportPlan plan;  // feasibility-rounded
    std::vector<double> f, g;
    double tau = 0.0;
    double primal_value = 0.0;  // regularized objective at the pre-rounding plan
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> raw;  // pre-rounding plan, row-major
    std::vector<double> dual_trace;  // dual objective after each full iteration
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace detail

/// Log-domain Sinkhorn for the entropic problem with KL penalty tau against mu ⊗ nu.
inline EotSolution sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, double tau,
                            const SinkhornOptions& opt = {}) {
    require(tau > 0.0 && std::isfinite(tau), "sinkhorn: tau must be positive");
    require(mu.dim() == nu.dim(), "sinkhorn: dimension mismatch");
    const std::size_t n = mu.size(), m = nu.size();
    const CostMatrix C = cost_matrix(mu, nu, p);
    std::vector<double> la(n), lb(m);
    for (std::size_t i = 0; i < n; ++i) la[i] = std::log(mu.weight(i));
    for (std::size_t j = 0; j < m; ++j) lb[j] = std::log(nu.weight(j));

    EotSolution sol;
    sol.f.assign(n, 0.0);
    sol.g.assign(m, 0.0);
    sol.tau = tau;

    auto dual_value = [&](double t) {
        double s = 0.0, z = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += mu.weight(i) * sol.f[i];
        for (std::size_t j = 0; j < m; ++j) s += nu.weight(j) * sol.g[j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                z += std::exp((sol.f[i] + sol.g[j] - C(i, j)) / t + la[i] + lb[j]);
        return s - t * z + t;
    };

    auto solve_at = [&](double t, std::size_t budget) {
        std::vector<double> row(m), colv(n);
        for (std::size_t it = 0; it < budget; ++it) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) row[j] = lb[j] + (sol.g[j] - C(i, j)) / t;
                sol.f[i] = -t * detail::log_sum_exp(row);
            }
            for (std::size_t j = 0; j < m; ++j) {
                for (std::size_t i = 0; i < n; ++i) colv[i] = la[i] + (sol.f[i] - C(i, j)) / t;
                sol.g[j] = -t * detail::log_sum_exp(colv);
            }
            ++sol.iterations;
            // columns are exact after the g-update; measure the row violation
            double viol = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double r = 0.0;
                for (std::size_t j = 0; j < m; ++j) r += std::exp((sol.f[i] + sol.g[j] - C(i, j)) / t + lb[j]);
                viol += std::abs(mu.weight(i) * r - mu.weight(i));
            }
            if (opt.record_dual && t == tau) sol.dual_trace.push_back(dual_value(t));
            if (viol < opt.tol) return true;
        }
        return false;
    };

    if (opt.tau_scaling) {
        for (std::size_t k = opt.scaling_stages; k > 0; --k)
            solve_at(tau * std::ldexp(1.0, int(k)), opt.max_iter);
    }
    sol.converged = solve_at(tau, opt.max_iter);

    sol.raw.assign(n * m, 0.0);
    double cost = 0.0, kl = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double lr = (sol.f[i] + sol.g[j] - C(i, j)) / tau;
            const double v = std::exp(lr + la[i] + lb[j]);
            sol.raw[i * m + j] = v;
            cost += v * C(i, j);
            kl += v * lr;
            mass += v;
        }
    sol.primal_value = cost + tau * (kl - mass + 1.0);
    for (double v : sol.raw)
        if (!std::isfinite(v)) throw NumericalError("sinkhorn: non-finite plan entry");
    sol.plan = round_plan_to_feasible(sol.raw, mu, nu, p);
    return sol;
}

}  // namespace stochot
