#include "colormod/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "colormod/errors.hpp"

namespace colormod {

InstanceResult score_instance(const ColorTriple& triple, const RgbColor& prediction,
                              SplitCondition condition) {
    InstanceResult r;
    r.triple = triple;
    r.prediction = prediction;
    r.condition = condition;

    const Vec3 pred_dir{prediction.r - triple.ref_color.r, prediction.g - triple.ref_color.g,
                        prediction.b - triple.ref_color.b};
    const Vec3 true_dir{triple.target_color.r - triple.ref_color.r,
                        triple.target_color.g - triple.ref_color.g,
                        triple.target_color.b - triple.ref_color.b};
    const Cosine cs = cosine_similarity(pred_dir, true_dir);
    r.cosine = cs.value;
    r.degenerate_cosine = cs.degenerate;
    r.target_equals_ref = norm(true_dir) == 0.0;
    r.delta_e = delta_e_2000(prediction, triple.target_color);
    return r;
}

namespace {

struct RunningStats {
    // Means of per-run means; population SD across runs.
    std::vector<double> run_cosine_means;
    std::vector<double> run_deltae_means;
    std::size_t n_instances = 0;
    std::size_t n_degenerate = 0;
};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

MetricAgg finish(const RunningStats& st) {
    MetricAgg agg;
    agg.cosine_mean = mean_of(st.run_cosine_means);
    agg.cosine_sd = population_sd(st.run_cosine_means);
    agg.deltae_mean = mean_of(st.run_deltae_means);
    agg.deltae_sd = population_sd(st.run_deltae_means);
    agg.n_instances = st.n_instances;
    agg.n_degenerate = st.n_degenerate;
    return agg;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

EvalReport aggregate(const std::vector<std::vector<ModelRunResults>>& per_run,
                     const std::string& config_digest) {
    if (per_run.empty()) {
        throw StructuralError("aggregate: zero runs");
    }
    std::vector<std::string> models;
    for (const auto& mr : per_run.front()) models.push_back(mr.model);
    for (const auto& run : per_run) {
        if (run.size() != models.size()) {
            throw StructuralError("aggregate: model sets differ across runs");
        }
        for (std::size_t i = 0; i < run.size(); ++i) {
            if (run[i].model != models[i]) {
                throw StructuralError("aggregate: model sets differ across runs");
            }
        }
    }

    EvalReport report;
    report.runs = static_cast<int>(per_run.size());
    report.config_digest = config_digest;

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        std::map<std::string, RunningStats> by_condition;
        for (const auto& run : per_run) {
            const auto& instances = run[mi].instances;
            // Bucketed per-run means, plus the pooled "overall" bucket.
            std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> samples;
            for (const auto& inst : instances) {
                for (const std::string key : {std::string(to_string(inst.condition)),
                                              std::string(kOverallName)}) {
                    auto& [cosines, deltaes] = samples[key];
                    if (!inst.target_equals_ref) cosines.push_back(inst.cosine);
                    deltaes.push_back(inst.delta_e);
                    auto& st = by_condition[key];
                    st.n_instances += 1;
                    if (inst.degenerate_cosine || inst.target_equals_ref) st.n_degenerate += 1;
                }
            }
            for (auto& [key, cd] : samples) {
                auto& st = by_condition[key];
                if (!cd.first.empty()) st.run_cosine_means.push_back(mean_of(cd.first));
                if (!cd.second.empty()) st.run_deltae_means.push_back(mean_of(cd.second));
            }
        }
        // Emit rows in fixed condition order, then overall.
        for (SplitCondition c : kAllConditions) {
            auto it = by_condition.find(to_string(c));
            if (it == by_condition.end()) continue;
            report.rows.push_back({models[mi], to_string(c), finish(it->second)});
        }
        auto it = by_condition.find(kOverallName);
        if (it != by_condition.end()) {
            report.rows.push_back({models[mi], kOverallName, finish(it->second)});
        }
    }
    return report;
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "text-table") return ReportFormat::TextTable;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    if (s == "svg-swatches") return ReportFormat::SvgSwatches;
    throw ConfigError("unknown report format: " + s);
}

namespace {

constexpr const char* kReportFormatTag = "colormod-eval-report";
constexpr int kReportVersion = 1;
constexpr const char* kCsvHeader =
    "model,condition,cosine_mean,cosine_sd,deltae_mean,deltae_sd,n_instances,n_degenerate";

nlohmann::json rgb_json(const RgbColor& c) {
    return {c.r, c.g, c.b};
}

RgbColor rgb_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

std::string render_csv(const EvalReport& report) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& row : report.rows) {
        out << row.model << ',' << row.condition << ',' << format_real(row.agg.cosine_mean)
            << ',' << format_real(row.agg.cosine_sd) << ','
            << format_real(row.agg.deltae_mean) << ',' << format_real(row.agg.deltae_sd)
            << ',' << row.agg.n_instances << ',' << row.agg.n_degenerate << '\n';
    }
    return out.str();
}

std::string render_text_table(const EvalReport& report) {
    std::ostringstream out;
    out << "runs: " << report.runs << "   config: " << report.config_digest << "\n\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-18s %22s %24s %6s %6s\n", "model", "condition",
                  "cosine (mean+-sd)", "delta_e (mean+-sd)", "n", "degen");
    out << line;
    out << std::string(92, '-') << '\n';
    for (const auto& row : report.rows) {
        std::string cond = row.condition;
        for (SplitCondition c : kAllConditions) {
            if (cond == to_string(c)) cond = display_name(c);
        }
        if (cond == kOverallName) cond = "Overall";
        char coscol[40], decol[40];
        std::snprintf(coscol, sizeof coscol, "%8.3f +- %-6.3f", row.agg.cosine_mean,
                      row.agg.cosine_sd);
        std::snprintf(decol, sizeof decol, "%9.3f +- %-7.3f", row.agg.deltae_mean,
                      row.agg.deltae_sd);
        std::snprintf(line, sizeof line, "%-12s %-18s %22s %24s %6zu %6zu\n", row.model.c_str(),
                      cond.c_str(), coscol, decol, row.agg.n_instances, row.agg.n_degenerate);
        out << line;
    }
    return out.str();
}

void append_swatch_rect(std::ostringstream& out, double x, double y, const RgbColor& c,
                        const std::string& label) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "  <rect x=\"%.1f\" y=\"%.1f\" width=\"46\" height=\"30\" "
                  "fill=\"rgb(%d,%d,%d)\" stroke=\"#444\"/>\n",
                  x, y, static_cast<int>(std::lround(c.r)), static_cast<int>(std::lround(c.g)),
                  static_cast<int>(std::lround(c.b)));
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"9\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  x, y + 42.0, label.c_str());
    out << buf;
}

std::string render_svg(const EvalReport& report) {
    const double row_h = 64.0;
    const double col_w = 56.0;
    std::size_t max_preds = 0;
    for (const auto& s : report.swatches) max_preds = std::max(max_preds, s.predictions.size());
    const double width = 260.0 + col_w * static_cast<double>(2 + max_preds);
    const double height = 40.0 + row_h * static_cast<double>(report.swatches.size());

    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n",
                  width, height);
    out << buf;
    out << "  <text x=\"8\" y=\"18\" font-size=\"12\" font-family=\"sans-serif\">"
           "reference / target / model predictions</text>\n";
    double y = 32.0;
    for (const auto& s : report.swatches) {
        std::string desc = s.triple.ref_label + " + \"" + s.triple.modifier + "\" (" +
                           s.condition + ")";
        if (s.gate_p) {
            std::snprintf(buf, sizeof buf, " p_rgb=%.3f p_hsv=%.3f", *s.gate_p,
                          1.0 - *s.gate_p);
            desc += buf;
        }
        std::snprintf(buf, sizeof buf,
                      "  <text x=\"8\" y=\"%.1f\" font-size=\"10\" "
                      "font-family=\"sans-serif\">%s</text>\n",
                      y + 18.0, desc.c_str());
        out << buf;
        double x = 260.0;
        append_swatch_rect(out, x, y, s.triple.ref_color, "ref");
        x += col_w;
        append_swatch_rect(out, x, y, s.triple.target_color, "target");
        x += col_w;
        for (const auto& [model, pred] : s.predictions) {
            append_swatch_rect(out, x, y, pred, model);
            x += col_w;
        }
        y += row_h;
    }
    out << "</svg>\n";
    return out.str();
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"model", row.model},
                        {"condition", row.condition},
                        {"cosine_mean", row.agg.cosine_mean},
                        {"cosine_sd", row.agg.cosine_sd},
                        {"deltae_mean", row.agg.deltae_mean},
                        {"deltae_sd", row.agg.deltae_sd},
                        {"n_instances", row.agg.n_instances},
                        {"n_degenerate", row.agg.n_degenerate}});
    }
    nlohmann::json swatches = nlohmann::json::array();
    for (const auto& s : report.swatches) {
        nlohmann::json preds = nlohmann::json::array();
        for (const auto& [model, pred] : s.predictions) {
            preds.push_back({{"model", model}, {"color", rgb_json(pred)}});
        }
        nlohmann::json entry{{"ref_label", s.triple.ref_label},
                             {"ref_color", rgb_json(s.triple.ref_color)},
                             {"modifier", s.triple.modifier},
                             {"target_label", s.triple.target_label},
                             {"target_color", rgb_json(s.triple.target_color)},
                             {"condition", s.condition},
                             {"predictions", preds}};
        if (s.gate_p) entry["p_rgb"] = *s.gate_p;
        swatches.push_back(entry);
    }
    return {{"format", kReportFormatTag}, {"version", kReportVersion},
            {"runs", report.runs},        {"config_digest", report.config_digest},
            {"rows", rows},               {"swatches", swatches}};
}

} // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::TextTable: return render_text_table(report);
        case ReportFormat::Csv: return render_csv(report);
        case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
        case ReportFormat::SvgSwatches: return render_svg(report);
    }
    throw ConfigError("unknown report format");
}

EvalReport report_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid report JSON: ") + e.what());
    }
    if (j.value("format", "") != kReportFormatTag) {
        throw ParseError("not an evaluation report");
    }
    EvalReport report;
    report.runs = j.value("runs", 0);
    report.config_digest = j.value("config_digest", "");
    for (const auto& row : j.at("rows")) {
        ReportRow r;
        r.model = row.at("model").get<std::string>();
        r.condition = row.at("condition").get<std::string>();
        r.agg.cosine_mean = row.at("cosine_mean").get<double>();
        r.agg.cosine_sd = row.at("cosine_sd").get<double>();
        r.agg.deltae_mean = row.at("deltae_mean").get<double>();
        r.agg.deltae_sd = row.at("deltae_sd").get<double>();
        r.agg.n_instances = row.at("n_instances").get<std::size_t>();
        r.agg.n_degenerate = row.at("n_degenerate").get<std::size_t>();
        report.rows.push_back(std::move(r));
    }
    for (const auto& s : j.value("swatches", nlohmann::json::array())) {
        SwatchEntry e;
        e.triple.ref_label = s.at("ref_label").get<std::string>();
        e.triple.ref_color = rgb_from_json(s.at("ref_color"));
        e.triple.modifier = s.at("modifier").get<std::string>();
        e.triple.target_label = s.at("target_label").get<std::string>();
        e.triple.target_color = rgb_from_json(s.at("target_color"));
        e.condition = s.at("condition").get<std::string>();
        for (const auto& p : s.at("predictions")) {
            e.predictions.emplace_back(p.at("model").get<std::string>(),
                                       rgb_from_json(p.at("color")));
        }
        if (s.contains("p_rgb")) e.gate_p = s.at("p_rgb").get<double>();
        report.swatches.push_back(std::move(e));
    }
    return report;
}

EvalReport report_from_csv_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw ParseError("report CSV: missing or wrong header row");
    }
    EvalReport report;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string f[8];
        for (int i = 0; i < 8; ++i) {
            if (!std::getline(fields, f[i], ',')) {
                throw ParseError("report CSV row " + std::to_string(row_no) +
                                 ": expected 8 fields");
            }
        }
        ReportRow r;
        r.model = f[0];
        r.condition = f[1];
        r.agg.cosine_mean = std::stod(f[2]);
        r.agg.cosine_sd = std::stod(f[3]);
        r.agg.deltae_mean = std::stod(f[4]);
        r.agg.deltae_sd = std::stod(f[5]);
        r.agg.n_instances = std::stoul(f[6]);
        r.agg.n_degenerate = std::stoul(f[7]);
        report.rows.push_back(std::move(r));
    }
    return report;
}

} // namespace colormod
