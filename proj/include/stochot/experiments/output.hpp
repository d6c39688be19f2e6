#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stochot/experiments/runner.hpp"
#include "stochot/io/serialize.hpp"

namespace stochot {

inline constexpr const char* kResultsHeader = "setting,d,n,seed,estimator,metric,value";

inline std::string results_to_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& metadata = {}) {
    require(!rows.empty(), "emit_csv: no rows");
    std::string out;
    for (const auto& m : metadata) out += "# " + m + "\n";
    out += kResultsHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.setting + ',' + std::to_string(r.d) + ',' + std::to_string(r.n) + ',' + std::to_string(r.seed) + ',' +
               r.estimator + ',' + r.metric + ',' + format_number(r.value) + '\n';
    }
    return out;
}

inline void emit_csv(const std::vector<ResultRow>& rows, const std::string& path,
                     const std::vector<std::string>& metadata = {}) {
    io::write_file(path, results_to_csv(rows, metadata));
}

inline ExperimentResult results_from_csv(const std::string& text) {
    ExperimentResult res;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    auto count = [](const std::string& s) {
        const double v = io::parse_double(s, "results csv");
        require(v >= 0.0 && v == std::floor(v), "results csv: expected a count, got '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            res.metadata.push_back(line.size() > 2 ? line.substr(2) : std::string{});
            continue;
        }
        if (!header) {
            require(line == kResultsHeader, "results csv: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        auto c = io::split_csv_line(line);
        require(c.size() == 7, "results csv: expected 7 columns");
        double v = c[6] == "nan" ? std::nan("") : io::parse_double(c[6], "results csv");
        res.rows.push_back({c[0], count(c[1]), count(c[2]), count(c[3]), c[4], c[5], v});
    }
    require(header, "results csv: missing header");
    return res;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows, const std::vector<double>& qs) {
    std::string out = "setting,d,n,estimator,metric,mean";
    for (double q : qs) out += ",q" + format_number(q);
    out += ",count,failures\n";
    for (const auto& s : rows) {
        out += s.setting + ',' + std::to_string(s.d) + ',' + std::to_string(s.n) + ',' + s.estimator + ',' + s.metric +
               ',' + format_number(s.mean);
        for (double q : s.q) out += ',' + format_number(q);
        out += ',' + std::to_string(s.count) + ',' + std::to_string(s.failures) + '\n';
    }
    return out;
}

struct PlotSpec {
    std::string metric = "ep";
    std::string title;
    std::size_t B = 1000;
    std::vector<double> quantiles = {0.1, 0.9};
    std::uint64_t seed = 0;
    int width = 720, height = 480;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                               "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return p;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

/// Log-log curves of the per-n mean of spec.metric, one per (estimator, d), with the
/// bootstrap band between the first and last requested quantile shaded.
inline std::string svg_plot(const std::vector<ResultRow>& rows, const PlotSpec& spec) {
    std::vector<ResultRow> sel;
    for (const auto& r : rows)
        if (r.metric == spec.metric) sel.push_back(r);
    require(!sel.empty(), "plot: no rows for metric '" + spec.metric + "'");
    require(spec.quantiles.size() >= 2, "plot: need a lower and an upper quantile");
    auto summary = summarize(sel, spec.B, spec.quantiles, spec.seed);

    using Series = std::pair<std::string, std::size_t>;  // (estimator, d)
    std::map<Series, std::vector<const SummaryRow*>> series;
    for (const auto& s : summary)
        if (std::isfinite(s.mean)) series[{s.estimator, s.d}].push_back(&s);
    require(!series.empty(), "plot: every value is NaN");

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [key, pts] : series)
        for (const auto* s : pts) {
            xmin = std::min(xmin, static_cast<double>(s->n));
            xmax = std::max(xmax, static_cast<double>(s->n));
            for (double v : {s->mean, s->q.front(), s->q.back()})
                if (v > 0.0) {
                    ymin = std::min(ymin, v);
                    ymax = std::max(ymax, v);
                }
        }
    if (!(ymin <= ymax)) ymin = ymax = 1.0;  // nothing positive
    const double floor_y = ymin;             // nonpositive values sit on the bottom edge
    double lx0 = std::log10(xmin), lx1 = std::log10(xmax), ly0 = std::floor(std::log10(ymin) * 4.0) / 4.0,
           ly1 = std::ceil(std::log10(ymax) * 4.0) / 4.0;
    if (lx1 - lx0 < 1e-9) {
        lx0 -= 0.5;
        lx1 += 0.5;
    }
    if (ly1 - ly0 < 1e-9) {
        ly0 -= 0.5;
        ly1 += 0.5;
    }
    const double W = spec.width, H = spec.height, ml = 70, mr = 170, mt = 40, mb = 55;
    auto X = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ml - mr); };
    auto Y = [&](double y) { return H - mb - (std::log10(std::max(y, floor_y)) - ly0) / (ly1 - ly0) * (H - mt - mb); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const std::string title = spec.title.empty() ? spec.metric + " vs n" : spec.title;
    o << "<text x=\"" << detail::fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(title) << "</text>\n";
    // axes
    o << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << detail::fmt(H - mb) << "\" x2=\"" << detail::fmt(W - mr) << "\" y2=\""
      << detail::fmt(H - mb) << "\"/>\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << detail::fmt(H - mb) << "\"/>\n";
    o << "</g>\n<g id=\"ticks\" font-size=\"11\">\n";
    std::set<std::size_t> ns;
    for (const auto& [key, pts] : series)
        for (const auto* s : pts) ns.insert(s->n);
    for (auto n : ns) {
        const double x = X(static_cast<double>(n));
        o << "<line x1=\"" << detail::fmt(x) << "\" y1=\"" << detail::fmt(H - mb) << "\" x2=\"" << detail::fmt(x)
          << "\" y2=\"" << detail::fmt(H - mb + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << detail::fmt(x) << "\" y=\"" << detail::fmt(H - mb + 18) << "\" text-anchor=\"middle\">" << n
          << "</text>\n";
    }
    for (double e = std::ceil(ly0 * 4.0) / 4.0; e <= ly1 + 1e-9; e += 0.25) {
        const double v = std::pow(10.0, e);
        const double y = H - mb - (e - ly0) / (ly1 - ly0) * (H - mt - mb);
        o << "<line x1=\"" << detail::fmt(ml - 5) << "\" y1=\"" << detail::fmt(y) << "\" x2=\"" << ml << "\" y2=\""
          << detail::fmt(y) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << detail::fmt(ml - 8) << "\" y=\"" << detail::fmt(y + 4) << "\" text-anchor=\"end\">"
          << detail::tick_label(std::round(v * 1000.0) / 1000.0) << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << detail::fmt((ml + W - mr) / 2) << "\" y=\"" << detail::fmt(H - 12)
      << "\" text-anchor=\"middle\">n (log scale)</text>\n";
    o << "<text transform=\"translate(18," << detail::fmt((mt + H - mb) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::xml_escape(spec.metric) << " (log scale)</text>\n";

    std::size_t idx = 0;
    for (const auto& [key, pts] : series) {
        const auto& color = detail::palette()[idx % detail::palette().size()];
        const std::string label = key.first + " d=" + std::to_string(key.second);
        o << "<g id=\"series-" << idx << "\">\n";
        std::string band, line;
        for (const auto* s : pts) band += detail::fmt(X(static_cast<double>(s->n))) + "," + detail::fmt(Y(s->q.back())) + " ";
        for (auto it = pts.rbegin(); it != pts.rend(); ++it)
            band += detail::fmt(X(static_cast<double>((*it)->n))) + "," + detail::fmt(Y((*it)->q.front())) + " ";
        for (const auto* s : pts) line += detail::fmt(X(static_cast<double>(s->n))) + "," + detail::fmt(Y(s->mean)) + " ";
        band.pop_back();
        line.pop_back();
        o << "<polygon points=\"" << band << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        for (const auto* s : pts)
            o << "<circle cx=\"" << detail::fmt(X(static_cast<double>(s->n))) << "\" cy=\"" << detail::fmt(Y(s->mean))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = mt + 10 + 18.0 * static_cast<double>(idx);
        o << "<line x1=\"" << detail::fmt(W - mr + 15) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\"" << detail::fmt(W - mr + 35)
          << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << detail::fmt(W - mr + 40) << "\" y=\"" << detail::fmt(ly + 4) << "\">" << detail::xml_escape(label)
          << "</text>\n";
        o << "</g>\n";
        ++idx;
    }
    o << "</svg>\n";
    return o.str();
}

inline void emit_svg_plot(const std::vector<ResultRow>& rows, const PlotSpec& spec, const std::string& path) {
    io::write_file(path, svg_plot(rows, spec));
}

/// Planar routing figure with four layers: source, rounded source, plan segments, destination.
struct RoutingFigure {
    std::vector<Point> source, rounded, destination;
    struct Segment {
        Point from, to;
        double mass;
    };
    std::vector<Segment> segments;
};

/// Rounds every atom of μ through the estimator's rounding stages and draws the
/// preliminary plan's segments from occupied cells to target samples.
inline RoutingFigure routing_figure(const DiscreteMeasure& mu, const Estimate& est) {
    require(mu.dim() == 2, "routing figure: planar measures only");
    const auto& stages = est.pipeline.stages;
    require(stages.size() == 3 && std::holds_alternative<DiscreteKernelStage>(stages[2]),
            "routing figure: needs a rounding estimator");
    RoutingFigure fig;
    KernelPipeline round_only({stages[0], stages[1]});
    for (std::size_t i = 0; i < mu.size(); ++i) {
        fig.source.push_back(mu.point_copy(i));
        fig.rounded.push_back(detail::propagate(round_only, mu.point(i), 1, nullptr).front().first);
    }
    const auto& kernel = *std::get<DiscreteKernelStage>(stages[2]).kernel;
    const auto& src = kernel.source_points();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = kernel.source_weights()[i];
        for (const auto& [j, pr] : kernel.row(i)) fig.segments.push_back({src[i], kernel.target_points()[j], w * pr});
    }
    fig.destination = kernel.target_points();
    return fig;
}

inline std::string routing_svg(const RoutingFigure& fig, int size = 520) {
    const double S = size, m = 20;
    auto X = [&](double x) { return detail::fmt(m + x * (S - 2 * m)); };
    auto Y = [&](double y) { return detail::fmt(S - m - y * (S - 2 * m)); };
    double wmax = 0.0;
    for (const auto& s : fig.segments) wmax = std::max(wmax, s.mass);
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 "
      << size << ' ' << size << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<g id=\"source\" fill=\"#1f77b4\" fill-opacity=\"0.35\">\n";
    for (const auto& p : fig.source) o << "<circle cx=\"" << X(p[0]) << "\" cy=\"" << Y(p[1]) << "\" r=\"1.5\"/>\n";
    o << "</g>\n<g id=\"rounded-source\" fill=\"#1f77b4\">\n";
    std::set<std::vector<double>> seen;
    for (const auto& p : fig.rounded)
        if (seen.insert(p).second) o << "<circle cx=\"" << X(p[0]) << "\" cy=\"" << Y(p[1]) << "\" r=\"3\"/>\n";
    o << "</g>\n<g id=\"plan\" stroke=\"#555555\">\n";
    for (const auto& s : fig.segments)
        o << "<line x1=\"" << X(s.from[0]) << "\" y1=\"" << Y(s.from[1]) << "\" x2=\"" << X(s.to[0]) << "\" y2=\""
          << Y(s.to[1]) << "\" stroke-opacity=\"" << detail::fmt(0.15 + 0.75 * s.mass / std::max(wmax, 1e-300))
          << "\"/>\n";
    o << "</g>\n<g id=\"destination\" fill=\"#d62728\">\n";
    for (const auto& p : fig.destination) o << "<circle cx=\"" << X(p[0]) << "\" cy=\"" << Y(p[1]) << "\" r=\"2\"/>\n";
    o << "</g>\n</svg>\n";
    return o.str();
}

}  // namespace stochot
