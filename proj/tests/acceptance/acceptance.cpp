// Acceptance harness: one PASS/FAIL line per criterion, artifacts under --out-dir.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "../property_checks.hpp"
#include "stochot/stochot.hpp"

using namespace stochot;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> body;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string tally_text(const test::CheckTally& t) {
    return std::to_string(t.count) + " checks, " + std::to_string(t.violations) + " violations, worst lhs-rhs " +
           num(t.worst_excess);
}

fs::path g_out;

std::string read_text(const fs::path& p) { return io::read_file(p.string()); }

void write_text(const fs::path& p, const std::string& s) { io::write_file(p.string(), s); }

// Mean of one metric per (estimator, d, n).
std::map<std::tuple<std::string, std::size_t, std::size_t>, double> means(const std::vector<ResultRow>& rows,
                                                                          const std::string& metric) {
    std::map<std::tuple<std::string, std::size_t, std::size_t>, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows)
        if (r.metric == metric) {
            auto& a = acc[{r.estimator, r.d, r.n}];
            a.first += r.value;
            ++a.second;
        }
    std::map<std::tuple<std::string, std::size_t, std::size_t>, double> out;
    for (const auto& [k, a] : acc) out[k] = a.first / static_cast<double>(a.second);
    return out;
}

// ---- random instances shared by criteria 1 and 3

struct OtInstance {
    DiscreteMeasure mu, nu;
    double p;
};

std::vector<OtInstance> ot_instances() {
    std::vector<OtInstance> out;
    const double ps[] = {1.0, 1.5, 2.0};
    for (std::uint64_t t = 0; t < 200; ++t) {
        Rng rng = make_rng(derive_seed(101, {t}));
        const std::size_t n = 1 + t % 7, d = 1 + (t / 7) % 3;
        out.push_back({test::random_measure(n, d, rng, true), test::random_measure(n, d, rng, true), ps[t % 3]});
    }
    return out;
}

Outcome oracle_equivalence() {
    double worst = 0.0;
    for (const auto& in : ot_instances())
        worst = std::max(worst, std::abs(exact_ot(in.mu, in.nu, in.p).cost_value -
                                         brute_force_ot(in.mu, in.nu, in.p).cost_value));
    return {worst <= 1e-9, "200 instances, max |exact - brute force| = " + num(worst)};
}

Outcome optimal_kernel_nullification() {
    double worst = 0.0;
    for (const auto& in : ot_instances()) {
        auto k = kernel_from_plan(exact_ot(in.mu, in.nu, in.p));
        worst = std::max(worst, transportation_error(k, in.mu, in.nu, in.p).ep);
    }
    return {worst <= 1e-9, "200 instances, max E_p = " + num(worst)};
}

// ---- criterion 2, 9, 10

template <class F>
void run_property(test::CheckTally& tally, std::uint64_t seed, int trials, F&& check, double slack) {
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        tally.add(check(rng), slack);
    }
}

Outcome stability_suite() {
    struct Prop {
        const char* name;
        std::function<std::vector<test::Check>(Rng&)> fn;
    };
    auto one = [](test::Check (*f)(Rng&)) { return [f](Rng& r) { return std::vector<test::Check>{f(r)}; }; };
    const std::vector<Prop> props = {
        {"target", one(test::check_nu_stability)},
        {"affine", one(test::check_affine_stability)},
        {"refined-tv", one(test::check_refined_tv)},
        {"composition", one(test::check_composition)},
        {"codomain", one(test::check_codomain_restriction)},
        {"map-comparison", one(test::check_map_comparison)},
        {"monge-gap", test::check_monge_gap},
    };
    Outcome o;
    std::uint64_t seed = 200;
    for (const auto& prop : props) {
        test::CheckTally t;
        run_property(t, seed++, 250, prop.fn, 1e-7);
        o.pass = o.pass && t.violations == 0;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + prop.name + " " + std::to_string(t.violations) + "/" +
                    std::to_string(t.count);
    }
    return o;
}

Outcome lower_bound_grids() {
    test::CheckTally t;
    for (std::size_t d : {2u, 4u})
        for (double p : {1.0, 2.0}) {
            for (double eps : {0.05, 0.2}) t.add(test::check_lb_tv(eps, d, p), 1e-9);
            for (double rho : {0.01, 0.1}) t.add(test::check_lb_wp(rho, d, p), 1e-9);
        }
    return {t.violations == 0, "p in {1,2}: " + tally_text(t)};
}

Outcome metric_facts() {
    test::CheckTally ks, tv;
    run_property(ks, 300, 200, test::check_ks_facts, 1e-9);
    run_property(tv, 301, 200, test::check_tv_wp_fact, 1e-9);
    return {ks.violations == 0 && tv.violations == 0, "1D: " + tally_text(ks) + "; d<=3: " + tally_text(tv)};
}

// ---- criterion 4

Outcome figure2() {
    const double delta = 0.05;
    auto inst = gen_figure2(200, delta);
    auto rep = transportation_error(inst.kappa_star, inst.mu, inst.nu, 1.0);
    const double l1 = lp_map_distance(inst.t_flipped, inst.t_star, inst.mu, 1.0);
    const double e_flip = transportation_error(inst.t_flipped, inst.mu, inst.nu, 1.0).ep;
    // rounding slack on a quantity that equals delta analytically
    const double tol = 1e-12;
    const bool ok = rep.optimality_gap <= 1e-9 && rep.feasibility_gap <= delta + tol && std::abs(l1 - 2.0) <= 1e-9 &&
                    e_flip <= delta + tol;
    return {ok, "kernel opt gap " + num(rep.optimality_gap) + ", feas gap " + num(rep.feasibility_gap) +
                    "; flipped map L1 " + num(l1) + ", E_1 " + num(e_flip)};
}

// ---- experiments writing artifacts (5, 6, 7, 8); each returns its files for the rerun in 11

struct Artifacts {
    std::map<std::string, std::string> files;  // name -> bytes
    void write() const {
        for (const auto& [name, bytes] : files) write_text(g_out / name, bytes);
    }
};

Artifacts render(const std::string& stem, const ExperimentResult& res, const ExperimentConfig& cfg,
                 const std::vector<std::string>& metrics) {
    Artifacts a;
    a.files[stem + ".csv"] = results_to_csv(res.rows, res.metadata);
    a.files[stem + "_summary.csv"] =
        summary_to_csv(summarize(res.rows, cfg.bootstrap_B, cfg.quantiles, cfg.master_seed), cfg.quantiles);
    for (const auto& m : metrics) {
        PlotSpec spec;
        spec.metric = m;
        spec.B = cfg.bootstrap_B;
        spec.quantiles = cfg.quantiles;
        spec.seed = cfg.master_seed;
        spec.title = "setting " + cfg.setting + ": " + m + " vs n";
        a.files[stem + "_" + m + ".svg"] = svg_plot(res.rows, spec);
    }
    return a;
}

ExperimentConfig setting_a_config(std::size_t threads) {
    ExperimentConfig cfg;
    cfg.setting = "A";
    cfg.dims = {3, 5};
    cfg.N = 2000;
    cfg.n_grid = {10, 25, 50, 100};
    cfg.K = 20;
    cfg.master_seed = 2024;
    cfg.estimators = {{"nn", {}}, {"rounding-cubic", {}}};
    cfg.bootstrap_B = 1000;
    cfg.threads = threads;
    return cfg;
}

ExperimentConfig setting_b_config(std::size_t threads) {
    auto cfg = setting_a_config(threads);
    cfg.setting = "B";
    cfg.dims = {3};
    return cfg;
}

Artifacts setting_a_artifacts(std::size_t threads, ExperimentResult* out = nullptr) {
    auto cfg = setting_a_config(threads);
    auto res = run_experiment(cfg);
    auto a = render("settingA", res, cfg, {"ep", "lp_vs_tstar"});
    if (out) *out = std::move(res);
    return a;
}

Artifacts setting_b_artifacts(std::size_t threads, ExperimentResult* out = nullptr) {
    auto cfg = setting_b_config(threads);
    auto res = run_experiment(cfg);
    auto a = render("settingB", res, cfg, {"ep"});
    if (out) *out = std::move(res);
    return a;
}

bool bands_present(const std::string& summary_csv) {
    return summary_csv.rfind("setting,d,n,estimator,metric,mean,q0.1,q0.9,", 0) == 0;
}

// Decreasing-trend check shared by settings A and B.
void check_trend(Outcome& o, const ExperimentResult& res, const std::vector<std::size_t>& dims) {
    auto ep = means(res.rows, "ep");
    for (const char* e : {"nn", "rounding-cubic"})
        for (auto d : dims) {
            const double a = ep[{e, d, 10}], b = ep[{e, d, 100}];
            o.pass = o.pass && b < a;
            o.detail += std::string("; ") + e + " d=" + std::to_string(d) + " E_1 " + num(a) + " -> " + num(b);
        }
}

std::size_t failure_count(const ExperimentResult& res) {
    std::size_t n = 0;
    for (const auto& r : res.rows) n += std::isnan(r.value);
    return n;
}

Outcome setting_a() {
    ExperimentResult res;
    auto art = setting_a_artifacts(0, &res);
    art.write();
    Outcome o;
    auto lp = means(res.rows, "lp_vs_tstar");
    double lp_min = INFINITY;
    for (auto d : {3u, 5u})
        for (auto n : {10u, 25u, 50u, 100u}) {
            auto it = lp.find({"nn", d, n});
            lp_min = it == lp.end() ? -INFINITY : std::min(lp_min, it->second);
        }
    o.pass = lp_min >= 1.0;
    o.detail = "min NN mean L1 vs T* " + num(lp_min);
    check_trend(o, res, {3, 5});
    const bool bands = bands_present(art.files.at("settingA_summary.csv"));
    o.pass = o.pass && bands && failure_count(res) == 0;
    o.detail += bands ? "; 10/90 bands written" : "; bands missing";
    return o;
}

Outcome setting_b() {
    Rng rng = make_rng(derive_seed(2024, {hash_string("B-check")}));
    auto g = gen_setting_b(500, 3, rng);
    const double ef = transportation_error(*g.t_star, g.mu, g.nu, 1.0).ep;
    ExperimentResult res;
    auto art = setting_b_artifacts(0, &res);
    art.write();
    Outcome o;
    o.pass = ef <= 1e-9 && failure_count(res) == 0;
    o.detail = "E_1(f) on N=500 " + num(ef);
    check_trend(o, res, {3});
    return o;
}

// 1D: μ = ν = uniform on N draws from Unif[0,1]; independent n-samples on each side.
struct Rate1D {
    Artifacts art;
    double mean100 = 0.0, mean400 = 0.0;
};

Rate1D rate_1d_run() {
    Rng base = make_rng(derive_seed(77, {hash_string("1d-proxy")}));
    auto proxy = empirical(test::random_points(10000, 1, base));
    const double wp = wasserstein_p(proxy, proxy, 1.0);
    std::vector<ResultRow> rows;
    Rate1D r;
    for (std::size_t n : {100u, 400u}) {
        double sum = 0.0;
        for (std::size_t s = 0; s < 50; ++s) {
            Rng rng = make_rng(derive_seed(77, {n, s}));
            auto xs = sample(proxy, n, rng), ys = sample(proxy, n, rng);
            auto est = cdf_estimator_1d(xs, ys, 1.0);
            ErrorOptions eo;
            eo.wp_mu_nu = wp;
            const double e = transportation_error(est.pipeline, proxy, proxy, 1.0, {}, eo).ep;
            rows.push_back({"unif1d", 1, n, s, "cdf1d", "ep", e});
            sum += e;
        }
        (n == 100 ? r.mean100 : r.mean400) = sum / 50.0;
    }
    r.art.files["rate1d.csv"] = results_to_csv(rows, {"unif1d proxy N=10000 seeds=50 p=1"});
    PlotSpec spec;
    spec.metric = "ep";
    spec.B = 1000;
    spec.title = "cdf1d: E_1 vs n";
    r.art.files["rate1d.svg"] = svg_plot(rows, spec);
    return r;
}

Outcome rate_1d() {
    auto r = rate_1d_run();
    r.art.write();
    const double ratio = r.mean100 / r.mean400;
    return {ratio >= 1.4 && ratio <= 3.0,
            "mean E_1 n=100 " + num(r.mean100) + ", n=400 " + num(r.mean400) + ", ratio " + num(ratio)};
}

// ---- criterion 8

ExperimentConfig robust_config(bool corrupted) {
    ExperimentConfig cfg;
    cfg.setting = "A";
    cfg.dims = {3};
    cfg.N = 2000;
    cfg.n_grid = {200};
    cfg.K = 10;
    cfg.master_seed = 7;
    cfg.estimators = {{"robust-conv", {{"check_support", false}}}, {"null", {}}};
    cfg.mc = {200, 0, 4};
    cfg.bootstrap_B = 1000;
    if (corrupted) cfg.budget = CorruptionBudget{0.1, 0.05, 1.0};
    return cfg;
}

struct RobustRun {
    Artifacts art;
    ExperimentResult clean, dirty;
};

RobustRun robust_run() {
    RobustRun r;
    auto cc = robust_config(false), cd = robust_config(true);
    r.clean = run_experiment(cc);
    r.dirty = run_experiment(cd);
    auto a = render("robust_clean", r.clean, cc, {"ep"});
    auto b = render("robust_corrupted", r.dirty, cd, {"ep"});
    r.art.files.insert(a.files.begin(), a.files.end());
    r.art.files.insert(b.files.begin(), b.files.end());
    return r;
}

Outcome robust() {
    const std::size_t d = 3, n = 200;
    Outcome o;

    // (a) preliminary problem solved through Sinkhorn, checked against the exact optimum
    Rng grng = make_rng(derive_seed(7, {hash_string("robust-a")}));
    auto g = gen_setting_a(2000, d, grng);
    double worst_slack = -INFINITY;
    std::size_t checked = 0;
    for (std::uint64_t k = 0; k < 10; ++k)
        for (bool dirty : {false, true}) {
            Rng rng = make_rng(derive_seed(7, {k, dirty}));
            auto xs = sample(g.mu, n, rng), ys = sample(g.nu, n, rng);
            if (dirty) {
                xs = corrupt(xs, {0.1, 0.05, 1.0}, {}, rng).points;
                ys = corrupt(ys, {0.1, 0.05, 1.0}, {}, rng).points;
            }
            EstimatorConfig ec;
            ec.check_support = false;
            ec.solver = SolverMode::Sinkhorn;
            ec.seed = derive_seed(7, {k, dirty, 1});
            auto est = robust_conv_estimator(xs, ys, 0.1, 0.05, ec);
            const double opt = exact_ot(*est.prelim_source, *est.prelim_target, 1.0).cost_value;
            const double tau_acc = std::pow(static_cast<double>(n), -1.0 / (d + 2.0));
            worst_slack = std::max(worst_slack, est.prelim_cost - opt - tau_acc);
            ++checked;
            o.pass = o.pass && !est.flagged;
        }
    o.pass = o.pass && worst_slack <= 0.0;
    o.detail = "(a) " + std::to_string(checked) + " solves, max (subopt - tau_acc) " + num(worst_slack);

    // (b) and (c) from the runner
    auto r = robust_run();
    r.art.write();
    auto clean = means(r.clean.rows, "ep"), dirty = means(r.dirty.rows, "ep");
    const double mc = clean[{"robust-conv", d, n}], md = dirty[{"robust-conv", d, n}];
    const double sd = std::sqrt(static_cast<double>(d));
    const double guard = 5.0 * (sd * 0.1 + sd * std::sqrt(0.05));
    o.pass = o.pass && md - mc <= guard && failure_count(r.clean) == 0 && failure_count(r.dirty) == 0;
    o.detail += "; (b) E_1 clean " + num(mc) + ", corrupted " + num(md) + ", excess " + num(md - mc) + " vs guard " +
                num(guard);
    double null_max = 0.0;
    for (const auto* res : {&r.clean, &r.dirty})
        for (const auto& row : res->rows)
            if (row.estimator == "null" && row.metric == "ep") null_max = std::max(null_max, row.value);
    o.pass = o.pass && null_max <= 2.0 * sd;
    o.detail += "; (c) null max E_1 " + num(null_max) + " <= " + num(2.0 * sd);
    return o;
}

// ---- criterion 11: regenerate every artifact with a different thread count and compare bytes

Outcome determinism() {
    std::vector<Artifacts> again;
    again.push_back(setting_a_artifacts(3));
    again.push_back(setting_b_artifacts(3));
    again.push_back(rate_1d_run().art);
    again.push_back(robust_run().art);
    std::size_t compared = 0, differ = 0;
    std::string first;
    for (const auto& a : again)
        for (const auto& [name, bytes] : a.files) {
            ++compared;
            const fs::path p = g_out / name;
            if (!fs::exists(p) || read_text(p) != bytes) {
                ++differ;
                if (first.empty()) first = name;
            }
        }
    return {differ == 0 && compared > 0, std::to_string(compared) + " CSV/SVG files compared, " +
                                             std::to_string(differ) + " differ" +
                                             (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("stochot acceptance checks");
    std::string out_dir = "acceptance_out";
    std::vector<int> only;
    app.add_option("--out-dir", out_dir, "Artifact directory");
    app.add_option("--only", only, "Run a subset of criteria");
    CLI11_PARSE(app, argc, argv);
    g_out = out_dir;
    fs::create_directories(g_out);

    const std::vector<Criterion> criteria = {
        {1, "oracle equivalence", 30, oracle_equivalence},
        {2, "stability suite", 300, stability_suite},
        {3, "optimal kernel nullification", 30, optimal_kernel_nullification},
        {4, "figure-2 instance", 30, figure2},
        {5, "setting A", 600, setting_a},
        {6, "setting B", 300, setting_b},
        {7, "1D rate", 60, rate_1d},
        {8, "robust estimation", 300, robust},
        {9, "lower-bound grids", 120, lower_bound_grids},
        {10, "KS/TV metric facts", 60, metric_facts},
        {11, "determinism", 1800, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        if (secs > c.limit_s) {
            o.pass = false;
            o.detail += "; over time limit " + num(c.limit_s) + " s";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << num(secs) << " s): "
                  << o.detail << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
    return failed ? 1 : 0;
}
