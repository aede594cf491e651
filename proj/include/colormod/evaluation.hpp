#pragma once

// Per-instance scoring (direction cosine + Delta-E 2000), cross-run
// aggregation into mean +- SD per test condition, and report rendering.

#include <optional>
#include <string>
#include <vector>

#include "colormod/colorspace.hpp"
#include "colormod/data.hpp"

#include "json.hpp"

namespace colormod {

struct InstanceResult {
    ColorTriple triple;
    RgbColor prediction;
    double cosine = 0.0;  // between (prediction - ref) and (target - ref)
    double delta_e = 0.0;
    SplitCondition condition = SplitCondition::SeenPairings;
    bool degenerate_cosine = false; // a direction vector had zero length
    bool target_equals_ref = false; // undefined direction; excluded from cosine means
    std::optional<double> gate_p;   // ensemble predictions only
};

InstanceResult score_instance(const ColorTriple& triple, const RgbColor& prediction,
                              SplitCondition condition);

// All scored instances of one model in one run.
struct ModelRunResults {
    std::string model;
    std::vector<InstanceResult> instances;
};

struct MetricAgg {
    double cosine_mean = 0.0;
    double cosine_sd = 0.0;
    double deltae_mean = 0.0;
    double deltae_sd = 0.0;
    std::size_t n_instances = 0;  // total across runs
    std::size_t n_degenerate = 0; // total flagged cosines across runs
};

struct ReportRow {
    std::string model;
    std::string condition; // condition name or "overall"
    MetricAgg agg;
};

// Instance-level sample kept for the swatch sheet.
struct SwatchEntry {
    ColorTriple triple;
    std::string condition;
    std::vector<std::pair<std::string, RgbColor>> predictions; // (model, color)
    std::optional<double> gate_p;
};

struct EvalReport {
    int runs = 0;
    std::string config_digest;
    std::vector<ReportRow> rows;
    std::vector<SwatchEntry> swatches;
};

inline constexpr const char* kOverallName = "overall";

// per_run[r] holds one ModelRunResults per model; the model list must be
// identical across runs. Means are per-run means averaged across runs; SD
// is the population SD of the per-run means (0 for a single run). The
// overall row pools every instance of a run, it is not a mean of condition
// means. Instances whose target equals their reference are excluded from
// cosine means and counted in n_degenerate.
EvalReport aggregate(const std::vector<std::vector<ModelRunResults>>& per_run,
                     const std::string& config_digest);

enum class ReportFormat { TextTable, Csv, Json, SvgSwatches };

ReportFormat report_format_from_string(const std::string& s);

std::string render_report(const EvalReport& report, ReportFormat format);

EvalReport report_from_json_text(const std::string& text);
// CSV carries the aggregate rows only (no swatches, run count or digest).
EvalReport report_from_csv_text(const std::string& text);

} // namespace colormod
