#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochot/error_metric.hpp"
#include "stochot/kernels/pipeline.hpp"
#include "stochot/measures.hpp"
#include "stochot/ot/plan.hpp"

namespace stochot::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot write '" + path + "'");
    out << text;
    require(static_cast<bool>(out), "write failed for '" + path + "'");
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---- measures ----

/// CSV layout: header `x1,...,xd,weight`; the weight column is optional (uniform when absent).
inline std::string measure_to_csv(const DiscreteMeasure& m) {
    std::string out;
    for (std::size_t k = 0; k < m.dim(); ++k) out += "x" + std::to_string(k + 1) + ",";
    out += "weight\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (double v : m.point(i)) out += format_number(v) + ',';
        out += format_number(m.weight(i)) + '\n';
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != ' ' && c != '\t') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InvalidArgument(what + ": '" + s + "' is not a number");
    }
    require(used == s.size(), what + ": '" + s + "' is not a number");
    return v;
}

inline DiscreteMeasure measure_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t dim = 0;
    bool header = false, has_weight = false;
    std::vector<double> coords, weights;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (!header) {
            has_weight = cells.back() == "weight";
            dim = cells.size() - (has_weight ? 1 : 0);
            require(dim >= 1, "measure csv: no coordinate columns");
            for (std::size_t k = 0; k < dim; ++k)
                require(cells[k] == "x" + std::to_string(k + 1), "measure csv: header must be x1,...,xd[,weight]");
            header = true;
            continue;
        }
        require(cells.size() == dim + (has_weight ? 1 : 0), "measure csv: row has the wrong number of columns");
        for (std::size_t k = 0; k < dim; ++k) coords.push_back(parse_double(cells[k], "measure csv"));
        weights.push_back(has_weight ? parse_double(cells[dim], "measure csv") : 1.0);
    }
    require(header, "measure csv: missing header");
    return make_discrete_flat(dim, std::move(coords), std::move(weights));
}

inline json measure_to_json(const DiscreteMeasure& m) {
    json pts = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) pts.push_back(m.point_copy(i));
    return {{"dim", m.dim()}, {"points", pts}, {"weights", m.weights()}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
    require(j.is_object() && j.contains("points"), "measure json: missing 'points'");
    auto pts = j.at("points").get<std::vector<Point>>();
    require(!pts.empty(), "measure json: empty point list");
    std::vector<double> w = j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                                                  : std::vector<double>(pts.size(), 1.0);
    return make_discrete(pts, w);
}

/// Format by extension: .json, otherwise CSV.
inline DiscreteMeasure load_measure(const std::string& path) {
    const auto text = read_file(path);
    if (ends_with(path, ".json")) return measure_from_json(json::parse(text));
    return measure_from_csv(text);
}

inline void save_measure(const DiscreteMeasure& m, const std::string& path) {
    write_file(path, ends_with(path, ".json") ? measure_to_json(m).dump(2) + "\n" : measure_to_csv(m));
}

// ---- plans and reports ----

inline json plan_to_json(const TransportPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) entries.push_back({e.i, e.j, e.mass});
    return {{"rows", plan.source.size()},
            {"cols", plan.target.size()},
            {"p", plan.p},
            {"cost_value", plan.cost_value},
            {"wp", std::pow(std::max(plan.cost_value, 0.0), 1.0 / plan.p)},
            {"source", measure_to_json(plan.source)},
            {"target", measure_to_json(plan.target)},
            {"entries", entries}};
}

inline json report_to_json(const EpReport& r) {
    return {{"transport_cost", r.transport_cost}, {"wp_mu_nu", r.wp_mu_nu},
            {"optimality_gap", r.optimality_gap}, {"feasibility_gap", r.feasibility_gap},
            {"ep", r.ep},                         {"mc_stderr", r.mc_stderr}};
}

// ---- pipelines ----

inline std::vector<Point> flat_to_points(const std::vector<double>& flat, std::size_t dim) {
    std::vector<Point> out;
    for (std::size_t i = 0; i + dim <= flat.size(); i += dim)
        out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i), flat.begin() + static_cast<std::ptrdiff_t>(i + dim));
    return out;
}

inline json kernel_to_json(const DiscreteKernel& k) {
    json rows = json::array();
    for (const auto& row : k.rows()) {
        json r = json::array();
        for (const auto& [j, w] : row) r.push_back({j, w});
        rows.push_back(r);
    }
    return {{"source", k.source_points()}, {"target", k.target_points()}, {"rows", rows},
            {"source_weights", k.source_weights()}};
}

inline DiscreteKernel kernel_from_json(const json& j) {
    auto src = j.at("source").get<std::vector<Point>>();
    auto tgt = j.at("target").get<std::vector<Point>>();
    std::vector<DiscreteKernel::Row> rows;
    for (const auto& r : j.at("rows")) {
        DiscreteKernel::Row row;
        for (const auto& e : r) row.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<double>());
        rows.push_back(std::move(row));
    }
    std::vector<double> sw;
    if (j.contains("source_weights")) sw = j.at("source_weights").get<std::vector<double>>();
    return DiscreteKernel(std::move(src), std::move(tgt), std::move(rows), std::move(sw));
}

inline json partition_to_json(const Partition& part) {
    if (part.is_cubic()) return {{"kind", "cubic"}, {"r", part.cubic().r}, {"offset", part.cubic().offset}};
    const auto& s = part.shell();
    return {{"kind", "shell"},
            {"delta", s.delta},
            {"dim", s.dim},
            {"anchors", flat_to_points(s.anchors, s.dim)},
            {"shell_count_cap", s.shell_count_cap}};
}

inline Partition partition_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "cubic") return Partition(CubicPartition{j.at("r").get<double>(), j.at("offset").get<Point>()});
    require(kind == "shell", "partition json: unknown kind '" + kind + "'");
    ShellPartition s;
    s.delta = j.at("delta").get<double>();
    s.dim = j.at("dim").get<std::size_t>();
    for (const auto& a : j.at("anchors").get<std::vector<Point>>()) s.anchors.insert(s.anchors.end(), a.begin(), a.end());
    s.shell_count_cap = j.value("shell_count_cap", 64);
    return Partition(std::move(s));
}

inline json stage_to_json(const Stage& stage) {
    return std::visit(
        [](const auto& st) -> json {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, DeterministicMap>) {
                using K = DeterministicMap::Kind;
                switch (st.kind) {
                    case K::Table:
                        return {{"type", "table"}, {"keys", st.table->keys}, {"values", st.table->values},
                                {"note", st.note}};
                    case K::Affine:
                        return {{"type", "affine"}, {"in_dim", st.in_dim}, {"out_dim", st.out_dim},
                                {"matrix", st.matrix}, {"offset", st.offset}};
                    case K::Constant:
                        return {{"type", "constant"}, {"value", st.offset}};
                    case K::OrthantShift:
                        return {{"type", "orthant_shift"}, {"shift", st.shift}};
                    case K::Function:
                        throw InvalidArgument("pipeline json: function maps cannot be serialized");
                }
                return {};
            } else if constexpr (std::is_same_v<T, NearestLookup>) {
                return {{"type", "nearest"}, {"anchors", flat_to_points(*st.anchors, st.dim)}};
            } else if constexpr (std::is_same_v<T, GaussianConvolution>) {
                return {{"type", "gaussian"}, {"sigma", st.sigma}};
            } else if constexpr (std::is_same_v<T, DiscreteKernelStage>) {
                return {{"type", "discrete_kernel"}, {"kernel", kernel_to_json(*st.kernel)}};
            } else if constexpr (std::is_same_v<T, RoundToPartition>) {
                return {{"type", "round"}, {"partition", partition_to_json(*st.partition)}};
            } else if constexpr (std::is_same_v<T, SoftmaxStage>) {
                const auto& D = *st.data;
                return {{"type", "softmax"}, {"dim", D.dim}, {"ys", D.ys}, {"log_weights", D.log_weights},
                        {"g", D.g}, {"tau", D.tau}, {"p", D.p}};
            } else {
                const auto& D = *st.data;
                return {{"type", "quantile1d"}, {"xs", D.xs}, {"x_cdf", D.x_cdf}, {"ys", D.ys}, {"y_cdf", D.y_cdf}};
            }
        },
        stage);
}

inline Stage stage_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "table")
        return DeterministicMap::from_table(j.at("keys").get<std::vector<Point>>(), j.at("values").get<std::vector<Point>>(),
                                            j.value("note", std::string{}));
    if (type == "affine")
        return DeterministicMap::affine(j.at("matrix").get<std::vector<double>>(), j.at("out_dim").get<std::size_t>(),
                                        j.at("in_dim").get<std::size_t>(), j.at("offset").get<Point>());
    if (type == "translation") return DeterministicMap::translation(j.at("offset").get<Point>());
    if (type == "constant") return DeterministicMap::constant(j.at("value").get<Point>());
    if (type == "orthant_shift") return DeterministicMap::orthant_shift(j.value("shift", 1.0));
    if (type == "nearest") return NearestLookup::over(j.at("anchors").get<std::vector<Point>>());
    if (type == "gaussian") {
        const double s = j.at("sigma").get<double>();
        require(s > 0.0, "pipeline json: sigma must be positive");
        return GaussianConvolution{s};
    }
    if (type == "discrete_kernel")
        return DiscreteKernelStage{std::make_shared<const DiscreteKernel>(kernel_from_json(j.at("kernel")))};
    if (type == "round") return RoundToPartition{std::make_shared<const Partition>(partition_from_json(j.at("partition")))};
    if (type == "softmax") {
        auto D = std::make_shared<SoftmaxStage::Data>();
        D->dim = j.at("dim").get<std::size_t>();
        D->ys = j.at("ys").get<std::vector<Point>>();
        D->log_weights = j.at("log_weights").get<std::vector<double>>();
        D->g = j.at("g").get<std::vector<double>>();
        D->tau = j.at("tau").get<double>();
        D->p = j.at("p").get<double>();
        require(D->ys.size() == D->g.size() && D->ys.size() == D->log_weights.size(), "pipeline json: softmax shape mismatch");
        return SoftmaxStage{std::move(D)};
    }
    if (type == "quantile1d") {
        auto D = std::make_shared<Quantile1DStage::Data>();
        D->xs = j.at("xs").get<std::vector<double>>();
        D->x_cdf = j.at("x_cdf").get<std::vector<double>>();
        D->ys = j.at("ys").get<std::vector<double>>();
        D->y_cdf = j.at("y_cdf").get<std::vector<double>>();
        return Quantile1DStage{std::move(D)};
    }
    throw InvalidArgument("pipeline json: unknown stage type '" + type + "'");
}

inline json pipeline_to_json(const KernelPipeline& k) {
    json stages = json::array();
    for (const auto& s : k.stages) stages.push_back(stage_to_json(s));
    return {{"stages", stages}};
}

/// Accepts {"stages": [...]}, a bare stage list, or a bare discrete kernel object.
inline KernelPipeline pipeline_from_json(const json& j) {
    try {
        if (j.is_object() && j.contains("rows") && j.contains("source"))
            return KernelPipeline::of(DiscreteKernelStage{std::make_shared<const DiscreteKernel>(kernel_from_json(j))});
        const json& arr = j.is_array() ? j : j.at("stages");
        std::vector<Stage> stages;
        for (const auto& s : arr) stages.push_back(stage_from_json(s));
        return KernelPipeline(std::move(stages));
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("pipeline json: ") + e.what());
    }
}

inline KernelPipeline load_pipeline(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidArgument("'" + path + "': " + e.what());
    }
    return pipeline_from_json(j);
}

}  // namespace stochot::io
