#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "stochot/kernels/pipeline.hpp"
#include "stochot/measures.hpp"
#include "stochot/ot/exact.hpp"

namespace stochot {

struct EpReport {
    double transport_cost = 0.0;
    double wp_mu_nu = 0.0;
    double optimality_gap = 0.0;
    double feasibility_gap = 0.0;
    double ep = 0.0;
    double mc_stderr = 0.0;
};

struct ErrorOptions {
    ExactOtOptions ot;
    /// Reuse a known W_p(μ, ν) instead of solving for it again.
    std::optional<double> wp_mu_nu;
};

namespace detail {

inline EpReport assemble_report(double cost, double wp, double feas, double stderr_) {
    EpReport r;
    r.transport_cost = std::max(cost, 0.0);
    r.wp_mu_nu = std::max(wp, 0.0);
    r.optimality_gap = std::max(r.transport_cost - r.wp_mu_nu, 0.0);
    r.feasibility_gap = std::max(feas, 0.0);
    r.ep = r.optimality_gap + r.feasibility_gap;
    r.mc_stderr = stderr_;
    return r;
}

inline double image_feasibility(const KernelImage& img, const DiscreteMeasure& nu, double p, const ExactOtOptions& ot) {
    auto push = make_discrete_flat(img.out_dim, img.out_coords, img.out_mass);
    return wasserstein_p(push, nu, p, ot);
}

}  // namespace detail

/// Transportation error: [cost − W_p(μ,ν)]_+ + W_p(κ♯μ, ν). With a Gaussian stage
/// the fields are means over mc.replicates independent Monte-Carlo images and
/// mc_stderr is the standard error of E_p across them.
inline EpReport transportation_error(const KernelPipeline& k, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     double p, const MonteCarloConfig& mc = {}, const ErrorOptions& opt = {}) {
    require(mu.dim() == nu.dim(), "transportation_error: dimension mismatch");
    const double wp = opt.wp_mu_nu ? *opt.wp_mu_nu : wasserstein_p(mu, nu, p, opt.ot);
    if (!k.has_continuous_stage()) {
        const auto img = kernel_image(k, mu, mc);
        return detail::assemble_report(transport_cost(img, mu, p), wp, detail::image_feasibility(img, nu, p, opt.ot), 0.0);
    }
    const std::size_t R = std::max<std::size_t>(mc.replicates, 1);
    double sum_cost = 0.0, sum_feas = 0.0;
    std::vector<double> eps;
    for (std::size_t r = 0; r < R; ++r) {
        MonteCarloConfig rep = mc;
        rep.seed = derive_seed(mc.seed, {0x7265706cULL, r});
        const auto img = kernel_image(k, mu, rep);
        const double c = transport_cost(img, mu, p);
        const double f = detail::image_feasibility(img, nu, p, opt.ot);
        sum_cost += c;
        sum_feas += f;
        eps.push_back(std::max(c - wp, 0.0) + f);
    }
    double se = 0.0;
    if (R > 1) {
        double mean = 0.0;
        for (double e : eps) mean += e;
        mean /= static_cast<double>(R);
        double var = 0.0;
        for (double e : eps) var += (e - mean) * (e - mean);
        var /= static_cast<double>(R - 1);
        se = std::sqrt(var / static_cast<double>(R));
    }
    return detail::assemble_report(sum_cost / R, wp, sum_feas / R, se);
}

inline EpReport transportation_error(const DiscreteKernel& k, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     double p, const ErrorOptions& opt = {}) {
    return transportation_error(KernelPipeline::of(DiscreteKernelStage{std::make_shared<DiscreteKernel>(k)}), mu, nu,
                                p, {}, opt);
}

/// E'_p = (cost^p − W_p(μ, κ♯μ)^p + W_p(κ♯μ, ν)^p)^{1/p}. The Monge gap is clamped at
/// zero when it is above −1e-9; a more negative value raises NumericalError.
inline double monge_gap_error(const KernelPipeline& k, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                              const MonteCarloConfig& mc = {}, const ExactOtOptions& ot = {}) {
    const auto img = kernel_image(k, mu, mc);
    const auto push = make_discrete_flat(img.out_dim, img.out_coords, img.out_mass);
    const double cost_p = std::pow(transport_cost(img, mu, p), p);
    const double w_self = std::pow(wasserstein_p(mu, push, p, ot), p);
    double gap = cost_p - w_self;
    if (gap < -1e-9) throw NumericalError("monge_gap_error: negative Monge gap");
    gap = std::max(gap, 0.0);
    const double feas = std::pow(wasserstein_p(push, nu, p, ot), p);
    return std::pow(gap + feas, 1.0 / p);
}

/// (Σ μ_i ‖t(x_i) − t*(x_i)‖^p)^{1/p} for deterministic pipelines.
inline double lp_map_distance(const KernelPipeline& t, const KernelPipeline& t_star, const DiscreteMeasure& mu, double p) {
    require(!t.has_continuous_stage() && !t_star.has_continuous_stage(), "lp_map_distance: stochastic stage present");
    auto single = [](const KernelPipeline& k, PointView x) {
        Cloud c = detail::propagate(k, x, 1, nullptr);
        require(c.size() == 1, "lp_map_distance: stochastic stage present");
        return std::move(c.front().first);
    };
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(mu.weight(i) > 0.0)) continue;
        s += mu.weight(i) * powered_distance(single(t, mu.point(i)), single(t_star, mu.point(i)), p);
    }
    return std::pow(s, 1.0 / p);
}

}  // namespace stochot
