#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "stochot/corruption.hpp"
#include "stochot/error_metric.hpp"
#include "stochot/estimators/estimators.hpp"
#include "stochot/experiments/config.hpp"
#include "stochot/experiments/generators.hpp"
#include "stochot/io/serialize.hpp"
#include "stochot/rng.hpp"
#include "stochot/version.hpp"

namespace stochot {

struct ResultRow {
    std::string setting;
    std::size_t d = 0, n = 0, seed = 0;
    std::string estimator, metric;
    double value = 0.0;
};

struct ExperimentResult {
    std::vector<std::string> metadata;  // lines without the leading "# "
    std::vector<ResultRow> rows;
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> m = {"ep", "optimality_gap", "feasibility_gap", "lp_vs_tstar", "wall_time_ms"};
    return m;
}

/// Quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> v, double q) {
    require(!v.empty(), "quantile: empty input");
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Quantiles of the mean over B resamples (with replacement) of `values`.
inline std::vector<double> bootstrap_quantiles(const std::vector<double>& values, std::size_t B,
                                               const std::vector<double>& qs, Rng& rng) {
    require(!values.empty(), "bootstrap: empty input");
    require(B >= 1, "bootstrap: B must be positive");
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> means(B);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += values[pick(rng)];
        m = s / static_cast<double>(values.size());
    }
    std::vector<double> out;
    for (double q : qs) out.push_back(empirical_quantile(means, q));
    return out;
}

inline std::size_t resolve_threads(std::size_t requested) {
    std::size_t t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STOCHOT_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) t = std::min<std::size_t>(t, static_cast<std::size_t>(cap));
    }
    return std::max<std::size_t>(t, 1);
}

/// True when every stage sends each point to a single point.
inline bool is_deterministic(const KernelPipeline& k) {
    for (const auto& s : k.stages) {
        if (std::holds_alternative<GaussianConvolution>(s) || std::holds_alternative<SoftmaxStage>(s) ||
            std::holds_alternative<Quantile1DStage>(s))
            return false;
        if (const auto* dk = std::get_if<DiscreteKernelStage>(&s))
            for (const auto& row : dk->kernel->rows())
                if (row.size() != 1) return false;
    }
    return true;
}

/// Ground truth for one dimension of the configured setting.
inline GroundTruth make_ground_truth(const ExperimentConfig& cfg, std::size_t d) {
    Rng rng = make_rng(derive_seed(cfg.master_seed, {hash_string(cfg.setting), d, hash_string("ground-truth")}));
    if (cfg.setting == "A") return gen_setting_a(cfg.N, d, rng, cfg.p);
    if (cfg.setting == "B") return gen_setting_b(cfg.N, d, rng);
    if (cfg.setting == "checkerboard") return gen_checkerboard(cfg.cells, cfg.N, rng);
    if (cfg.setting == "figure2") {
        auto f = gen_figure2(cfg.M, cfg.delta);
        return {f.mu, f.nu, f.t_star};
    }
    auto mu = io::load_measure(cfg.mu_path), nu = io::load_measure(cfg.nu_path);
    require(mu.dim() == d && nu.dim() == d, "custom setting: measure dimension differs from d");
    return {mu, nu, std::nullopt};
}

namespace detail {

struct CellOutput {
    std::vector<ResultRow> rows;
    std::vector<std::string> notes;
};

inline std::string params_line(const Estimate& est) {
    std::string s;
    for (const auto& [k, v] : est.params) s += " " + k + "=" + v;
    return s;
}

}  // namespace detail

/// Runs every (d, n, k) cell; rows come back sorted by (d, n, k, estimator order, metric order).
/// Seeds: data for cell (d, k, n) from derive_seed(master, {fnv1a(setting), d, k, n}); estimator
/// and Monte-Carlo randomness add fnv1a(estimator name) and a stream tag.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult res;
    const std::uint64_t hs = hash_string(cfg.setting);
    auto& meta = res.metadata;
    meta.push_back(std::string("stochot ") + STOCHOT_VERSION);
    meta.push_back("setting=" + cfg.setting + " N=" + std::to_string(cfg.N) + " K=" + std::to_string(cfg.K) +
                   " p=" + format_number(cfg.p) + " master_seed=" + std::to_string(cfg.master_seed));
    {
        std::string grid = "n_grid=";
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) grid += (i ? "," : "") + std::to_string(cfg.n_grid[i]);
        std::string est = "estimators=";
        for (std::size_t i = 0; i < cfg.estimators.size(); ++i) est += (i ? "," : "") + cfg.estimators[i].name;
        meta.push_back(grid + " " + est);
    }
    meta.push_back("sampling=iid-with-replacement seed_rule=derive_seed(master_seed,{fnv1a(setting),d,k,n})");
    meta.push_back("mc samples=" + std::to_string(cfg.mc.samples) + " replicates=" + std::to_string(cfg.mc.replicates));
    if (cfg.budget)
        meta.push_back("budget eps=" + format_number(cfg.budget->eps) + " rho=" + format_number(cfg.budget->rho) +
                       " outlier_scale=" + format_number(cfg.adversary.outlier_scale));
    for (const auto& e : cfg.estimators)
        if (!e.params.empty()) meta.push_back("overrides estimator=" + e.name + " " + e.params.dump());

    struct Truth {
        GroundTruth g;
        double wp;
    };
    std::vector<Truth> truths;
    ExactOtOptions ot{cfg.support_cap};
    for (auto d : cfg.dims) {
        auto g = make_ground_truth(cfg, d);
        const double wp = wasserstein_p(g.mu, g.nu, cfg.p, ot);
        meta.push_back("ground_truth d=" + std::to_string(d) + " atoms_mu=" + std::to_string(g.mu.size()) +
                       " atoms_nu=" + std::to_string(g.nu.size()) + " wp=" + format_number(wp));
        truths.push_back({std::move(g), wp});
    }

    struct Cell {
        std::size_t di, ni, k;
    };
    std::vector<Cell> cells;
    for (std::size_t di = 0; di < cfg.dims.size(); ++di)
        for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
            for (std::size_t k = 0; k < cfg.K; ++k) cells.push_back({di, ni, k});
    std::vector<detail::CellOutput> outputs(cells.size());

    auto run_cell = [&](std::size_t c) {
        const auto [di, ni, k] = cells[c];
        const std::size_t d = cfg.dims[di], n = cfg.n_grid[ni];
        const auto& truth = truths[di];
        auto& out = outputs[c];
        Rng data_rng = make_rng(derive_seed(cfg.master_seed, {hs, d, k, n}));
        auto xs = sample(truth.g.mu, n, data_rng);
        auto ys = sample(truth.g.nu, n, data_rng);
        if (cfg.budget) {
            Rng rx = make_rng(derive_seed(cfg.master_seed, {hs, d, k, n, hash_string("corrupt-source")}));
            Rng ry = make_rng(derive_seed(cfg.master_seed, {hs, d, k, n, hash_string("corrupt-target")}));
            auto cx = corrupt(xs, *cfg.budget, cfg.adversary, rx);
            auto cy = corrupt(ys, *cfg.budget, cfg.adversary, ry);
            if (k == 0 && !cx.warning.empty())
                out.notes.push_back("warning d=" + std::to_string(d) + " n=" + std::to_string(n) + " " + cx.warning);
            xs = std::move(cx.points);
            ys = std::move(cy.points);
        }
        for (const auto& spec : cfg.estimators) {
            const std::uint64_t he = hash_string(spec.name);
            auto row = [&](const std::string& metric, double v) {
                out.rows.push_back({cfg.setting, d, n, k, spec.name, metric, v});
            };
            const auto t0 = std::chrono::steady_clock::now();
            try {
                EstimatorConfig ec;
                ec.p = cfg.p;
                ec.seed = derive_seed(cfg.master_seed, {hs, d, k, n, he});
                if (cfg.budget) {
                    ec.eps = cfg.budget->eps;
                    ec.rho = cfg.budget->rho;
                }
                for (const auto& [key, v] : spec.params.items()) apply_estimator_param(ec, key, v);
                auto est = build_estimator(spec.name, xs, ys, ec);
                MonteCarloConfig mc = cfg.mc;
                mc.seed = derive_seed(cfg.master_seed, {hs, d, k, n, he, hash_string("mc")});
                ErrorOptions eo;
                eo.ot = ot;
                eo.wp_mu_nu = truth.wp;
                const auto rep = transportation_error(est.pipeline, truth.g.mu, truth.g.nu, cfg.p, mc, eo);
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                row("ep", rep.ep);
                row("optimality_gap", rep.optimality_gap);
                row("feasibility_gap", rep.feasibility_gap);
                if (truth.g.t_star && is_deterministic(est.pipeline))
                    row("lp_vs_tstar", lp_map_distance(est.pipeline, *truth.g.t_star, truth.g.mu, cfg.p));
                if (cfg.timing) row("wall_time_ms", ms);
                const std::string where = "d=" + std::to_string(d) + " n=" + std::to_string(n) +
                                          " seed=" + std::to_string(k) + " estimator=" + spec.name;
                if (k == 0) out.notes.push_back("params " + where + detail::params_line(est));
                if (est.flagged) out.notes.push_back("flag " + where + " " + est.flag_reason);
            } catch (const std::exception& e) {
                row("ep", std::numeric_limits<double>::quiet_NaN());
                out.notes.push_back("failure d=" + std::to_string(d) + " n=" + std::to_string(n) +
                                    " seed=" + std::to_string(k) + " estimator=" + spec.name + " " + e.what());
            }
        }
    };

    const std::size_t T = std::min(resolve_threads(cfg.threads), cells.size());
    if (T <= 1) {
        for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < T; ++t)
            pool.emplace_back([&] {
                for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) run_cell(c);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& o : outputs) {
        res.rows.insert(res.rows.end(), o.rows.begin(), o.rows.end());
        meta.insert(meta.end(), o.notes.begin(), o.notes.end());
    }
    return res;
}

struct SummaryRow {
    std::string setting;
    std::size_t d = 0, n = 0;
    std::string estimator, metric;
    double mean = 0.0;
    std::vector<double> q;  // bootstrap quantiles of the mean
    std::size_t count = 0, failures = 0;
};

/// Mean and bootstrap quantile band per (setting, d, estimator, metric, n); NaN rows count as failures.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, std::size_t B, const std::vector<double>& qs,
                                         std::uint64_t seed) {
    using Key = std::tuple<std::string, std::size_t, std::string, std::string, std::size_t>;
    std::map<Key, std::pair<std::vector<double>, std::size_t>> groups;
    for (const auto& r : rows) {
        auto& g = groups[{r.setting, r.d, r.estimator, r.metric, r.n}];
        if (std::isfinite(r.value))
            g.first.push_back(r.value);
        else
            ++g.second;
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, g] : groups) {
        const auto& [setting, d, est, metric, n] = key;
        SummaryRow s{setting, d, n, est, metric, std::numeric_limits<double>::quiet_NaN(), {}, g.first.size(), g.second};
        if (!g.first.empty()) {
            double sum = 0.0;
            for (double v : g.first) sum += v;
            s.mean = sum / static_cast<double>(g.first.size());
            Rng rng = make_rng(derive_seed(seed, {hash_string("bootstrap"), hash_string(setting), d, n, hash_string(est),
                                                  hash_string(metric)}));
            s.q = bootstrap_quantiles(g.first, B, qs, rng);
        } else {
            s.q.assign(qs.size(), std::numeric_limits<double>::quiet_NaN());
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace stochot
