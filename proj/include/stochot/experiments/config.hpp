#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochot/corruption.hpp"
#include "stochot/estimators/estimators.hpp"
#include "stochot/io/serialize.hpp"
#include "stochot/io/toml_lite.hpp"
#include "stochot/kernels/pipeline.hpp"

namespace stochot {

struct EstimatorSpec {
    std::string name;
    nlohmann::json params = nlohmann::json::object();  // overrides applied on top of the defaults
};

struct ExperimentConfig {
    std::string setting = "A";  // A | B | checkerboard | figure2 | custom
    std::vector<std::size_t> dims = {3};
    std::size_t N = 2000;
    std::vector<std::size_t> n_grid = {10, 25, 50, 75, 100};
    std::size_t K = 100;
    double p = 1.0;
    std::uint64_t master_seed = 0;
    std::vector<EstimatorSpec> estimators = {{"nn", {}}, {"rounding-cubic", {}}};
    std::optional<CorruptionBudget> budget;
    AdversaryStrategy adversary;
    std::size_t bootstrap_B = 1000;
    std::vector<double> quantiles = {0.1, 0.9};
    MonteCarloConfig mc{2000, 0, 10};
    std::size_t threads = 0;  // 0: hardware concurrency, capped by STOCHOT_THREADS
    bool timing = false;      // wall_time_ms rows make the CSV run-dependent
    std::size_t support_cap = 5000;
    // setting-specific
    std::size_t cells = 4;
    std::size_t M = 200;
    double delta = 0.05;
    std::string mu_path, nu_path;
    // artifacts, relative to the working directory
    std::string out_csv, out_summary, out_svg;
    std::string plot_metric = "ep";

    void validate() const {
        static const std::set<std::string> settings = {"A", "B", "checkerboard", "figure2", "custom"};
        require(settings.count(setting) == 1, "config: unknown setting '" + setting + "'");
        require(!dims.empty(), "config: d must not be empty");
        require(K >= 1, "config: K must be at least 1");
        require(!n_grid.empty(), "config: n_grid must not be empty");
        require(N >= 1, "config: N must be positive");
        for (auto n : n_grid) {
            require(n >= 1, "config: sample sizes must be positive");
            if (setting != "custom" && setting != "figure2") require(n <= N, "config: every n must satisfy n <= N");
        }
        require(p >= 1.0, "config: p must be >= 1");
        require(!estimators.empty(), "config: no estimators listed");
        for (const auto& e : estimators) {
            const auto& names = estimator_names();
            require(std::find(names.begin(), names.end(), e.name) != names.end(),
                    "config: unknown estimator '" + e.name + "'");
        }
        for (auto d : dims) {
            require(d >= 1, "config: d must be positive");
            if (setting == "A") require(d >= 2, "config: setting A needs d >= 2");
            if (setting == "checkerboard" || setting == "figure2") require(d == 2, "config: this setting is planar (d = 2)");
        }
        if (setting == "checkerboard") require(cells >= 2 && cells % 2 == 0, "config: cells must be even");
        if (setting == "figure2") require(M >= 2 && delta > 0.0, "config: figure2 needs M >= 2 and delta > 0");
        if (setting == "custom") require(!mu_path.empty() && !nu_path.empty(), "config: custom setting needs mu and nu files");
        if (budget) budget->validate();
        require(bootstrap_B >= 1, "config: bootstrap B must be positive");
        require(!quantiles.empty(), "config: quantile list must not be empty");
        for (double q : quantiles) require(q >= 0.0 && q <= 1.0, "config: quantiles must lie in [0,1]");
        require(mc.samples >= 1 && mc.replicates >= 1, "config: mc samples and replicates must be positive");
    }
};

/// Apply one named override to an estimator configuration.
inline void apply_estimator_param(EstimatorConfig& c, const std::string& key, const nlohmann::json& v) {
    auto num = [&]() {
        require(v.is_number(), "estimator param '" + key + "' must be a number");
        return v.get<double>();
    };
    auto count = [&]() {
        require(v.is_number_integer() && v.get<long long>() >= 0, "estimator param '" + key + "' must be a count");
        return static_cast<std::size_t>(v.get<long long>());
    };
    if (key == "tau") c.tau = num();
    else if (key == "r") c.r = num();
    else if (key == "delta") c.delta = num();
    else if (key == "delta_acc") c.delta_acc = num();
    else if (key == "sigma") c.sigma = num();
    else if (key == "m") c.m = count();
    else if (key == "tau_acc") c.tau_acc = num();
    else if (key == "eps") c.eps = num();
    else if (key == "rho") c.rho = num();
    else if (key == "exact_cap") c.exact_cap = count();
    else if (key == "sinkhorn_tol") c.sinkhorn.tol = num();
    else if (key == "sinkhorn_max_iter") c.sinkhorn.max_iter = count();
    else if (key == "solver") {
        require(v.is_string(), "estimator param 'solver' must be a string");
        c.solver = parse_solver_mode(v.get<std::string>());
    } else if (key == "check_support") {
        require(v.is_boolean(), "estimator param 'check_support' must be a boolean");
        c.check_support = v.get<bool>();
    } else {
        throw InvalidArgument("unknown estimator param '" + key + "'");
    }
}

/// `key=value` from the command line; the value is read as JSON when it parses, else as a string.
inline void apply_estimator_param(EstimatorConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, "estimator param must look like key=value");
    const auto key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    nlohmann::json v = nlohmann::json::parse(raw, nullptr, false);
    if (v.is_discarded()) v = raw;
    apply_estimator_param(c, key, v);
}

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
    require(obj.is_object(), "config: '" + where + "' must be a table");
    for (const auto& [k, _] : obj.items())
        require(allowed.count(k) == 1, "config: unknown key '" + k + "' in " + where);
}

template <class T>
T get_as(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument("config: bad value for '" + key + "' in " + where);
    }
}

inline std::size_t get_count(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    require(v.is_number_integer() && v.get<long long>() >= 0, "config: '" + key + "' in " + where + " must be a count");
    return static_cast<std::size_t>(v.get<long long>());
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::get_as;
    using detail::get_count;
    ExperimentConfig c;
    check_keys(j, {"setting", "d", "N", "n_grid", "K", "p", "master_seed", "estimators", "threads", "timing", "budget",
                   "bootstrap", "mc", "ot", "figure2", "checkerboard", "custom", "output"},
               "top level");
    if (j.contains("setting")) c.setting = get_as<std::string>(j, "setting", "top level");
    if (j.contains("d")) {
        const auto& d = j.at("d");
        c.dims.clear();
        if (d.is_array())
            for (const auto& v : d) {
                require(v.is_number_integer() && v.get<long long>() >= 1, "config: d entries must be positive integers");
                c.dims.push_back(v.get<std::size_t>());
            }
        else
            c.dims.push_back(get_count(j, "d", "top level"));
    }
    if (j.contains("N")) c.N = get_count(j, "N", "top level");
    if (j.contains("K")) c.K = get_count(j, "K", "top level");
    if (j.contains("n_grid")) {
        c.n_grid.clear();
        for (const auto& v : j.at("n_grid")) {
            require(v.is_number_integer() && v.get<long long>() >= 1, "config: n_grid entries must be positive integers");
            c.n_grid.push_back(v.get<std::size_t>());
        }
    }
    if (j.contains("p")) c.p = get_as<double>(j, "p", "top level");
    if (j.contains("master_seed")) {
        const auto& v = j.at("master_seed");
        require(v.is_number_integer(), "config: master_seed must be an integer");
        c.master_seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(v.get<long long>());
    }
    if (j.contains("threads")) c.threads = get_count(j, "threads", "top level");
    if (j.contains("timing")) c.timing = get_as<bool>(j, "timing", "top level");
    if (j.contains("estimators")) {
        c.estimators.clear();
        for (const auto& e : j.at("estimators")) {
            EstimatorSpec spec;
            if (e.is_string()) {
                spec.name = e.get<std::string>();
            } else {
                require(e.is_object() && e.contains("name"), "config: estimator entries need a name");
                spec.name = get_as<std::string>(e, "name", "estimators");
                spec.params = e;
                spec.params.erase("name");
                EstimatorConfig probe;
                for (const auto& [k, v] : spec.params.items()) apply_estimator_param(probe, k, v);
            }
            c.estimators.push_back(std::move(spec));
        }
    }
    if (j.contains("budget")) {
        const auto& b = j.at("budget");
        check_keys(b, {"eps", "rho", "adversary", "outlier_scale", "direction"}, "budget");
        CorruptionBudget budget;
        budget.eps = b.contains("eps") ? get_as<double>(b, "eps", "budget") : 0.0;
        budget.rho = b.contains("rho") ? get_as<double>(b, "rho", "budget") : 0.0;
        c.budget = budget;
        if (b.contains("adversary")) c.adversary.kind = parse_adversary(get_as<std::string>(b, "adversary", "budget"));
        if (b.contains("outlier_scale")) c.adversary.outlier_scale = get_as<double>(b, "outlier_scale", "budget");
        if (b.contains("direction")) c.adversary.direction = get_as<Point>(b, "direction", "budget");
    }
    if (j.contains("bootstrap")) {
        const auto& b = j.at("bootstrap");
        check_keys(b, {"B", "quantiles"}, "bootstrap");
        if (b.contains("B")) c.bootstrap_B = get_count(b, "B", "bootstrap");
        if (b.contains("quantiles")) c.quantiles = get_as<std::vector<double>>(b, "quantiles", "bootstrap");
    }
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        check_keys(m, {"samples", "replicates"}, "mc");
        if (m.contains("samples")) c.mc.samples = get_count(m, "samples", "mc");
        if (m.contains("replicates")) c.mc.replicates = get_count(m, "replicates", "mc");
    }
    if (j.contains("ot")) {
        const auto& o = j.at("ot");
        check_keys(o, {"support_cap"}, "ot");
        if (o.contains("support_cap")) c.support_cap = get_count(o, "support_cap", "ot");
    }
    if (j.contains("figure2")) {
        const auto& f = j.at("figure2");
        check_keys(f, {"M", "delta"}, "figure2");
        if (f.contains("M")) c.M = get_count(f, "M", "figure2");
        if (f.contains("delta")) c.delta = get_as<double>(f, "delta", "figure2");
    }
    if (j.contains("checkerboard")) {
        const auto& f = j.at("checkerboard");
        check_keys(f, {"cells"}, "checkerboard");
        if (f.contains("cells")) c.cells = get_count(f, "cells", "checkerboard");
    }
    if (j.contains("custom")) {
        const auto& f = j.at("custom");
        check_keys(f, {"mu", "nu"}, "custom");
        if (f.contains("mu")) c.mu_path = get_as<std::string>(f, "mu", "custom");
        if (f.contains("nu")) c.nu_path = get_as<std::string>(f, "nu", "custom");
    }
    if (j.contains("output")) {
        const auto& f = j.at("output");
        check_keys(f, {"csv", "summary", "svg", "metric"}, "output");
        if (f.contains("csv")) c.out_csv = get_as<std::string>(f, "csv", "output");
        if (f.contains("summary")) c.out_summary = get_as<std::string>(f, "summary", "output");
        if (f.contains("svg")) c.out_svg = get_as<std::string>(f, "svg", "output");
        if (f.contains("metric")) c.plot_metric = get_as<std::string>(f, "metric", "output");
    }
    c.validate();
    return c;
}

/// TOML unless the path ends in .json.
inline ExperimentConfig load_experiment_config(const std::string& path) {
    const auto text = io::read_file(path);
    nlohmann::json j;
    if (io::ends_with(path, ".json")) {
        j = nlohmann::json::parse(text, nullptr, false);
        require(!j.is_discarded(), "config: '" + path + "' is not valid JSON");
    } else {
        j = io::TomlLite::parse(text);
    }
    return experiment_config_from_json(j);
}

}  // namespace stochot
