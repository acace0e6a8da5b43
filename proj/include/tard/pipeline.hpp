#ifndef TARD_PIPELINE_HPP
#define TARD_PIPELINE_HPP

#include "tard/metrics.hpp"
#include "tard/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tard {

enum class AdaptationMode { episodic, online };

std::string to_string(AdaptationMode mode);
AdaptationMode adaptation_mode_from_string(const std::string& s);
std::string to_string(AdjacencyMode mode);
AdjacencyMode adjacency_mode_from_string(const std::string& s);

struct TrainConfig {
    double alpha1 = 1.0;  // weight of the contrastive loss while training
    double alpha2 = 0.1;  // weight of the statistics constraint while adapting
    int epochs = 200;
    int patience = 20;    // epochs without improvement before stopping
    double min_delta = 1e-4;
    double train_lr = 5e-3;
    double ttt_lr = 5e-3;
    int ttt_steps = 30;
    AdaptationMode mode = AdaptationMode::episodic;
    std::uint64_t seed = 0;
    int d_hidden = 16;
    int shared_layers = 1;
    int main_layers = 1;
    int ssl_layers = 1;
    AdjacencyMode adjacency = AdjacencyMode::undirected_sym;

    bool operator==(const TrainConfig&) const = default;
};

/// Throws std::invalid_argument naming the first out-of-range field.
void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct LabeledGraph {
    std::string id;
    int label = 0;
    PropGraph graph;
};

std::vector<LabeledGraph> prepare_graphs(std::span<const PropagationEvent> events, AdjacencyMode mode);

struct EpochLog {
    double main_loss = 0;
    double ssl_loss = 0; // 0 when alpha1 = 0 (branch not run)
};

struct TrainedModel {
    TardParams params;
    EmbeddingStats train_stats;
    TrainConfig config;
    std::vector<EpochLog> log;
};

/// Called after every optimizer step with the step index (from 0) and the params.
using StepObserver = std::function<void(std::int64_t, const TardParams&)>;

/// Joint training of L_m + alpha1 * L_s over all three parameter groups, one graph
/// per step, then training-set embedding statistics from the final params.
TrainedModel train_phase(std::span<const LabeledGraph> train_set, const TrainConfig& config,
                         const StepObserver& observer = {});

struct AdaptResult {
    TardParams params;
    double ssl_before = 0;
    double ssl_after = 0;
    double constraint_before = 0;
    double constraint_after = 0;
    int steps = 0;
};

/// ttt_steps optimizer steps on L_s + alpha2 * L_c for one test graph, updating
/// only Theta_e and Theta_s, with a fresh optimizer state. Before/after losses
/// are measured under one fixed shuffle drawn first from `rng`.
AdaptResult ttt_adapt(const PropGraph& graph, const TardParams& start, const EmbeddingStats& train_stats,
                      const TrainConfig& config, Rng& rng);

struct Prediction {
    int label = 0;
    RowVector probabilities;
};

/// Argmax of the classification branch; ties go to the lower class index.
Prediction predict(const PropGraph& graph, const TardParams& params);

struct EventRecord {
    std::string id;
    int true_label = 0;
    int predicted = 0;
    std::vector<double> probabilities;
    double ssl_before = 0;
    double ssl_after = 0;
    double constraint_before = 0;
    double constraint_after = 0;
    int steps = 0;
    double wall_seconds = 0;
};

nlohmann::json to_json(const EventRecord& record);

struct EvalResult {
    std::vector<EventRecord> records;
    MetricsReport metrics;
};

/// Per-event generator: a pure function of (seed, event id).
Rng event_rng(std::uint64_t seed, const std::string& event_id);

/// Restore, adapt, predict for every event independently. Parallel across
/// events, capped by TARD_THREADS.
EvalResult evaluate_episodic(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                             const TrainConfig& config);
EvalResult evaluate_episodic(std::span<const LabeledGraph> test_set, const TrainedModel& model);

/// Adapted params carry over from one event to the next, in order.
EvalResult evaluate_online(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                           const TrainConfig& config);
EvalResult evaluate_online(std::span<const LabeledGraph> test_set, const TrainedModel& model);

EvalResult evaluate(std::span<const LabeledGraph> test_set, const TrainedModel& model, const TrainConfig& config);

/// Predictions of the trained params with no adaptation at all.
EvalResult evaluate_plain(std::span<const LabeledGraph> test_set, const TardParams& params);

/// Worker count from TARD_THREADS (default: hardware concurrency).
int thread_budget();

/// Params + dims + config + train statistics + training log.
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace tard

#endif // TARD_PIPELINE_HPP
