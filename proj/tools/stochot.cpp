#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stochot/stochot.hpp"

namespace fs = std::filesystem;
using namespace stochot;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void log_params(const std::string& who, const Estimate& est) {
    std::cerr << who;
    for (const auto& [k, v] : est.params) std::cerr << ' ' << k << '=' << v;
    if (est.flagged) std::cerr << " flagged=\"" << est.flag_reason << '"';
    std::cerr << '\n';
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

struct RunArgs {
    std::string config, csv, summary, svg;
    std::size_t threads = 0;
};

int cmd_run(const RunArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (a.threads) cfg.threads = a.threads;
    const std::string csv = !a.csv.empty() ? a.csv : (!cfg.out_csv.empty() ? cfg.out_csv : "results.csv");
    const std::string summary = !a.summary.empty() ? a.summary : cfg.out_summary;
    const std::string svg = !a.svg.empty() ? a.svg : cfg.out_svg;
    auto res = run_experiment(cfg);
    emit_csv(res.rows, csv, res.metadata);
    std::cerr << "wrote " << res.rows.size() << " rows to " << csv << '\n';
    if (!summary.empty()) {
        io::write_file(summary, summary_to_csv(summarize(res.rows, cfg.bootstrap_B, cfg.quantiles, cfg.master_seed),
                                               cfg.quantiles));
        std::cerr << "wrote " << summary << '\n';
    }
    if (!svg.empty()) {
        PlotSpec spec;
        spec.metric = cfg.plot_metric;
        spec.B = cfg.bootstrap_B;
        spec.quantiles = cfg.quantiles;
        spec.seed = cfg.master_seed;
        spec.title = "setting " + cfg.setting + ": " + cfg.plot_metric + " vs n";
        emit_svg_plot(res.rows, spec, svg);
        std::cerr << "wrote " << svg << '\n';
    }
    return kOk;
}

struct EvalArgs {
    std::string mu, nu, kernel;
    double p = 1.0;
    std::size_t samples = 10000, replicates = 10;
    std::uint64_t seed = 0;
    bool monge = false;
};

int cmd_eval(const EvalArgs& a) {
    require(a.p >= 1.0, "--p must be >= 1");
    auto mu = io::load_measure(a.mu), nu = io::load_measure(a.nu);
    auto k = io::load_pipeline(a.kernel);
    MonteCarloConfig mc{a.samples, a.seed, a.replicates};
    auto rep = transportation_error(k, mu, nu, a.p, mc);
    json out = io::report_to_json(rep);
    if (a.monge) out["monge_gap_error"] = monge_gap_error(k, mu, nu, a.p, mc);
    std::cout << out.dump(2) << '\n';
    return kOk;
}

struct SolveArgs {
    std::string mu, nu, out, method = "exact";
    double p = 1.0, tau = 0.05;
};

int cmd_solve(const SolveArgs& a) {
    auto mu = io::load_measure(a.mu), nu = io::load_measure(a.nu);
    json j;
    if (a.method == "exact") {
        j = io::plan_to_json(exact_ot(mu, nu, a.p));
    } else if (a.method == "sinkhorn") {
        auto sol = sinkhorn(mu, nu, a.p, a.tau);
        j = io::plan_to_json(sol.plan);
        j["tau"] = a.tau;
        j["primal_value"] = sol.primal_value;
        j["iterations"] = sol.iterations;
        j["converged"] = sol.converged;
    } else {
        throw InvalidArgument("--method must be exact or sinkhorn");
    }
    if (a.out.empty())
        std::cout << j.dump(2) << '\n';
    else
        io::write_file(a.out, j.dump(2) + "\n");
    return kOk;
}

struct CorruptArgs {
    std::string in, out, adversary = "composite";
    double eps = 0.0, rho = 0.0, p = 1.0, outlier_scale = 10.0;
    std::uint64_t seed = 0;
};

int cmd_corrupt(const CorruptArgs& a) {
    auto m = io::load_measure(a.in);
    CorruptionBudget b{a.eps, a.rho, a.p};
    AdversaryStrategy s;
    s.kind = parse_adversary(a.adversary);
    s.outlier_scale = a.outlier_scale;
    Rng rng = make_rng(a.seed);
    auto res = corrupt(m.points(), b, s, rng);
    if (!res.warning.empty()) std::cerr << "warning: " << res.warning << '\n';
    io::save_measure(make_discrete(res.points, {m.weights().begin(), m.weights().end()}), a.out);
    std::cerr << "relocated " << res.relocated.size() << " of " << m.size() << " points\n";
    return kOk;
}

struct PlotArgs {
    std::string csv, out, metric = "ep", title;
    std::size_t B = 1000;
    std::vector<double> quantiles = {0.1, 0.9};
    std::uint64_t seed = 0;
};

int cmd_plot(const PlotArgs& a) {
    auto res = results_from_csv(io::read_file(a.csv));
    PlotSpec spec;
    spec.metric = a.metric;
    spec.title = a.title;
    spec.B = a.B;
    spec.quantiles = a.quantiles;
    spec.seed = a.seed;
    emit_svg_plot(res.rows, spec, a.out);
    std::cerr << "wrote " << a.out << '\n';
    return kOk;
}

struct GenArgs {
    std::string setting = "a", out_dir = ".", svg;
    std::size_t d = 3, N = 2000, cells = 4, M = 200, n = 200;
    double delta = 0.05, p = 1.0;
    std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    Rng rng = make_rng(a.seed);
    std::string s = a.setting;
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    GroundTruth g;
    std::optional<KernelPipeline> kappa;
    if (s == "a") {
        g = gen_setting_a(a.N, a.d, rng, a.p);
    } else if (s == "b") {
        g = gen_setting_b(a.N, a.d, rng);
    } else if (s == "checkerboard") {
        g = gen_checkerboard(a.cells, a.N, rng);
    } else if (s == "figure2") {
        auto f = gen_figure2(a.M, a.delta);
        g = {f.mu, f.nu, f.t_star};
        kappa = f.kappa_star;
    } else {
        throw InvalidArgument("--setting must be a, b, checkerboard or figure2");
    }
    io::save_measure(g.mu, join(dir, "mu.csv"));
    io::save_measure(g.nu, join(dir, "nu.csv"));
    if (g.t_star) io::write_file(join(dir, "t_star.json"), io::pipeline_to_json(*g.t_star).dump() + "\n");
    if (kappa) io::write_file(join(dir, "kappa_star.json"), io::pipeline_to_json(*kappa).dump() + "\n");
    if (!a.svg.empty()) {
        require(s == "checkerboard", "--svg is only available for the checkerboard setting");
        Rng srng = make_rng(derive_seed(a.seed, {hash_string("routing")}));
        auto xs = sample(g.mu, a.n, srng);
        auto ys = sample(g.nu, a.n, srng);
        EstimatorConfig ec;
        ec.p = a.p;
        auto est = rounding_cubic_estimator(xs, ys, ec);
        log_params("rounding-cubic", est);
        io::write_file(a.svg, routing_svg(routing_figure(g.mu, est)));
    }
    std::cerr << "wrote measures to " << a.out_dir << '\n';
    return kOk;
}

struct EstimateArgs {
    std::string estimator, xs, ys, out;
    double p = 1.0;
    std::vector<std::string> params;
    std::uint64_t seed = 0;
};

int cmd_estimate(const EstimateArgs& a) {
    auto xs = io::load_measure(a.xs).points(), ys = io::load_measure(a.ys).points();
    EstimatorConfig ec;
    ec.p = a.p;
    ec.seed = a.seed;
    for (const auto& kv : a.params) apply_estimator_param(ec, kv);
    auto est = build_estimator(a.estimator, xs, ys, ec);
    log_params(a.estimator, est);
    const auto text = io::pipeline_to_json(est.pipeline).dump() + "\n";
    if (a.out.empty())
        std::cout << text;
    else
        io::write_file(a.out, text);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochot: transportation-error evaluation for stochastic optimal transport maps"};
    app.set_version_flag("--version", std::string("stochot ") + STOCHOT_VERSION);
    app.require_subcommand(1);

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Run an experiment from a TOML or JSON config");
    c_run->add_option("--config,-c", run.config, "Config file")->required()->check(CLI::ExistingFile);
    c_run->add_option("--csv", run.csv, "Results CSV (overrides the config)");
    c_run->add_option("--summary", run.summary, "Summary CSV with bootstrap bands");
    c_run->add_option("--svg", run.svg, "Log-log plot of the configured metric");
    c_run->add_option("--threads", run.threads, "Worker threads (STOCHOT_THREADS still caps)");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Transportation error of a kernel between two measures");
    c_eval->add_option("--mu", ev.mu, "Source measure (CSV or JSON)")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--nu", ev.nu, "Target measure (CSV or JSON)")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--kernel,-k", ev.kernel, "Kernel pipeline JSON")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--p", ev.p, "Cost exponent");
    c_eval->add_option("--mc-samples", ev.samples, "Particles per source atom for Gaussian stages");
    c_eval->add_option("--mc-replicates", ev.replicates, "Independent Monte-Carlo replicates");
    c_eval->add_option("--seed", ev.seed, "Monte-Carlo seed");
    c_eval->add_flag("--monge", ev.monge, "Also report the Monge-gap variant");

    SolveArgs so;
    auto* c_solve = app.add_subcommand("solve", "Optimal transport plan between two measures");
    c_solve->add_option("--mu", so.mu)->required()->check(CLI::ExistingFile);
    c_solve->add_option("--nu", so.nu)->required()->check(CLI::ExistingFile);
    c_solve->add_option("--p", so.p, "Cost exponent");
    c_solve->add_option("--method", so.method, "exact or sinkhorn");
    c_solve->add_option("--tau", so.tau, "Entropic regularization for sinkhorn");
    c_solve->add_option("--out,-o", so.out, "Plan JSON (stdout when omitted)");

    CorruptArgs co;
    auto* c_corrupt = app.add_subcommand("corrupt", "Apply a corruption budget to a sample file");
    c_corrupt->add_option("--in", co.in)->required()->check(CLI::ExistingFile);
    c_corrupt->add_option("--out,-o", co.out)->required();
    c_corrupt->add_option("--eps", co.eps, "Fraction of relocated points");
    c_corrupt->add_option("--rho", co.rho, "Per-point shift budget");
    c_corrupt->add_option("--p", co.p);
    c_corrupt->add_option("--adversary", co.adversary, "relocate, shift or composite");
    c_corrupt->add_option("--outlier-scale", co.outlier_scale);
    c_corrupt->add_option("--seed", co.seed);

    PlotArgs pl;
    auto* c_plot = app.add_subcommand("plot", "Render a results CSV as a log-log SVG");
    c_plot->add_option("--csv", pl.csv)->required()->check(CLI::ExistingFile);
    c_plot->add_option("--out,-o", pl.out)->required();
    c_plot->add_option("--metric", pl.metric);
    c_plot->add_option("--title", pl.title);
    c_plot->add_option("--bootstrap", pl.B, "Bootstrap resamples");
    c_plot->add_option("--quantiles", pl.quantiles)->expected(2, 16);
    c_plot->add_option("--seed", pl.seed, "Bootstrap seed");

    GenArgs ge;
    auto* c_gen = app.add_subcommand("gen", "Write the measures of a synthetic setting");
    c_gen->add_option("--setting", ge.setting, "a, b, checkerboard or figure2");
    c_gen->add_option("--d", ge.d);
    c_gen->add_option("--N", ge.N, "Atoms per measure");
    c_gen->add_option("--seed", ge.seed);
    c_gen->add_option("--p", ge.p);
    c_gen->add_option("--cells", ge.cells, "Checkerboard cells per side");
    c_gen->add_option("--M", ge.M, "Grid points (figure2)");
    c_gen->add_option("--delta", ge.delta, "Oscillation scale (figure2)");
    c_gen->add_option("--out-dir", ge.out_dir);
    c_gen->add_option("--svg", ge.svg, "Routing figure (checkerboard)");
    c_gen->add_option("--n", ge.n, "Sample size for the routing figure");

    EstimateArgs es;
    auto* c_est = app.add_subcommand("estimate", "Build a kernel from two sample files");
    c_est->add_option("--estimator,-e", es.estimator)->required();
    c_est->add_option("--xs", es.xs, "Source samples")->required()->check(CLI::ExistingFile);
    c_est->add_option("--ys", es.ys, "Target samples")->required()->check(CLI::ExistingFile);
    c_est->add_option("--p", es.p);
    c_est->add_option("--param", es.params, "Override, key=value (repeatable)");
    c_est->add_option("--seed", es.seed);
    c_est->add_option("--out,-o", es.out, "Pipeline JSON (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (*c_run) return cmd_run(run);
        if (*c_eval) return cmd_eval(ev);
        if (*c_solve) return cmd_solve(so);
        if (*c_corrupt) return cmd_corrupt(co);
        if (*c_plot) return cmd_plot(pl);
        if (*c_gen) return cmd_gen(ge);
        if (*c_est) return cmd_estimate(es);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalError;
    }
    return kConfigError;
}
