#ifndef TARD_REPORT_HPP
#define TARD_REPORT_HPP

#include "tard/metrics.hpp"
#include "tard/pipeline.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tard {

/// Hex digest of a resolved configuration (FNV-1a over its canonical JSON dump).
std::string config_fingerprint(const nlohmann::json& resolved_config);

nlohmann::json to_json(const MetricsReport& report);

inline constexpr const char* kVariantFull = "TARD";
inline constexpr const char* kVariantNoConstraint = "TARD-constraint";
inline constexpr const char* kVariantNoTtt = "TARD-ttt";

struct VariantResult {
    std::string variant;
    TrainConfig config;
    EvalResult eval;
    double mean_constraint_after = 0; // mean post-adaptation L_c over the test set
};

struct AblationResult {
    TrainedModel model;
    std::vector<VariantResult> variants; // full, no constraint (alpha2 = 0), no ttt (0 steps)
};

/// Evaluates the three variants against one trained checkpoint with one seed.
AblationResult run_ablation(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                            const TrainConfig& config);
AblationResult run_ablation(std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> test_set,
                            const TrainConfig& config);

/// Zero plus a log-spaced ladder up to 10.
inline constexpr std::array<double, 9> kSensitivityGrid = {0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};

enum class SweepTarget { alpha1, alpha2 };

std::string to_string(SweepTarget which);
SweepTarget sweep_target_from_string(const std::string& s);

struct SweepRow {
    double value = 0;
    MetricsReport metrics;
};

/// One row per grid value, the other weight held at base_config. alpha1 retrains
/// per value; alpha2 shares one trained checkpoint.
std::vector<SweepRow> run_sensitivity(std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> test_set,
                                      const TrainConfig& base_config, SweepTarget which);

/// One line of a metric table.
struct ReportRow {
    std::string variant;
    std::uint64_t seed = 0;
    double accuracy = 0;
    double macro_f1 = 0;
    std::vector<double> per_class_f1;

    bool operator==(const ReportRow&) const = default;
};

ReportRow make_row(const std::string& variant, const MetricsReport& metrics);

enum class ReportFormat { csv, json, svg };

struct ReportTable {
    std::string title;
    std::string fingerprint;
    std::vector<std::string> notes; // extra provenance lines (e.g. the sweep grid)
    std::vector<ReportRow> rows;
    std::string x_label = "variant";

    bool operator==(const ReportTable&) const = default;
};

/// CSV: "# key: value" provenance lines, then
/// variant,seed,accuracy,macro_f1,f1_class0,...; values in shortest round-trip form.
std::string to_csv(const ReportTable& table);
ReportTable table_from_csv(const std::string& text);
nlohmann::json to_json(const ReportTable& table);
/// Single-panel chart of mean accuracy and macro-F1 per variant, in row order.
std::string to_svg(const ReportTable& table);

void emit_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format);

} // namespace tard

#endif // TARD_REPORT_HPP
