#include "tard/metrics.hpp"

#include <stdexcept>

namespace tard {

std::int64_t ConfusionMatrix::total() const
{
    std::int64_t t = 0;
    for (const auto& row : counts)
        for (auto c : row)
            t += c;
    return t;
}

std::int64_t ConfusionMatrix::trace() const
{
    std::int64_t t = 0;
    for (int k = 0; k < num_classes; ++k)
        t += counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const LabelPair> records, int num_classes)
{
    if (num_classes < 1)
        throw std::invalid_argument("confusion_matrix: need at least one class");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(static_cast<std::size_t>(num_classes), std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (const auto& r : records) {
        if (r.truth < 0 || r.truth >= num_classes || r.predicted < 0 || r.predicted >= num_classes)
            throw std::invalid_argument("confusion_matrix: label outside [0, " + std::to_string(num_classes) + ")");
        ++cm.counts[static_cast<std::size_t>(r.truth)][static_cast<std::size_t>(r.predicted)];
    }
    return cm;
}

MetricsReport compute_metrics(std::span<const LabelPair> records, int num_classes)
{
    if (records.empty())
        throw std::invalid_argument("compute_metrics: no records");
    MetricsReport m;
    m.confusion = confusion_matrix(records, num_classes);
    const auto& c = m.confusion.counts;
    m.accuracy = static_cast<double>(m.confusion.trace()) / static_cast<double>(m.confusion.total());
    double sum = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        std::int64_t predicted = 0, actual = 0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            predicted += c[j][k];
            actual += c[k][j];
        }
        const auto tp = static_cast<double>(c[k][k]);
        // F1 = 2TP / (2TP + FP + FN) = 2PR / (P + R)
        const double denom = static_cast<double>(predicted + actual);
        double f1 = 0;
        if (tp > 0)
            f1 = 2.0 * tp / denom;
        if (predicted == 0 && actual == 0)
            m.degenerate_classes.push_back(static_cast<int>(k));
        m.per_class_f1.push_back(f1);
        sum += f1;
    }
    m.macro_f1 = sum / static_cast<double>(num_classes);
    return m;
}

} // namespace tard
