#ifndef TARD_METRICS_HPP
#define TARD_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tard {

struct LabelPair {
    int truth = 0;
    int predicted = 0;
};

/// counts[true][predicted]
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::vector<std::int64_t>> counts;

    std::int64_t total() const;
    std::int64_t trace() const;
};

ConfusionMatrix confusion_matrix(std::span<const LabelPair> records, int num_classes);

struct MetricsReport {
    double accuracy = 0;
    double macro_f1 = 0;
    std::vector<double> per_class_f1;
    /// Classes whose F1 denominator was empty (no instances and no predictions).
    std::vector<int> degenerate_classes;
    ConfusionMatrix confusion;
    std::string config_fingerprint;
    std::uint64_t seed = 0;
};

/// Accuracy, per-class F1 (0 when precision + recall = 0) and their unweighted mean.
MetricsReport compute_metrics(std::span<const LabelPair> records, int num_classes = 2);

} // namespace tard

#endif // TARD_METRICS_HPP
