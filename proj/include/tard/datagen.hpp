#ifndef TARD_DATAGEN_HPP
#define TARD_DATAGEN_HPP

#include "tard/graph.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tard {

/// Parameters of one synthetic cascade domain.
///
/// Class means sit at +/- separation/2 along the first feature axis, are rotated
/// by `mean_rotation` in the plane of the first two axes and then translated by
/// `mean_translation`. The root post gets `root_offset` added on the last axis.
/// Per-post noise is isotropic with std `feature_noise_std`; with `homophily` > 0
/// it is correlated along reply edges while keeping that marginal.
struct DomainSpec {
    int num_events = 400;
    double class_balance = 0.5; // probability of label 1
    int feature_dim = 8;
    double class_mean_separation = 2.0;
    double feature_noise_std = 1.0;
    int min_nodes = 10;
    int max_nodes = 60;
    double branching_bias = 0.5; // 0 chain-like, 1 star-like
    double structure_signal_strength = 1.0;
    double root_offset = 2.0;
    double topic_noise_std = 0.0; // per-event offset shared by all posts of the event
    double homophily = 0.0;       // correlation of a post's noise with its parent's, in [0, 1)
    double mean_rotation = 0.0;
    std::vector<double> mean_translation; // empty means zero
    std::uint64_t seed = 0;
    std::string id_prefix = "ev";

    bool operator==(const DomainSpec&) const = default;
};

struct ShiftSpec {
    double rotation_angle = 0.0;
    std::vector<double> mean_translation; // empty means zero
    double noise_scale_factor = 1.0;
    double size_scale_factor = 1.0;
    double branching_shift = 0.0;

    bool operator==(const ShiftSpec&) const = default;
};

void validate(const DomainSpec& spec);
void validate(const ShiftSpec& shift, int feature_dim);

nlohmann::json to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const nlohmann::json& j, DomainSpec base = {});
nlohmann::json to_json(const ShiftSpec& shift);
ShiftSpec shift_spec_from_json(const nlohmann::json& j, ShiftSpec base = {});

/// The two class means after rotation and translation, one per row.
Matrix class_means(const DomainSpec& spec);

/// Effective branching bias for a class after the structural tilt.
double class_branching_bias(const DomainSpec& spec, int label);

/// Deterministic in spec (including its seed). Event k draws from its own
/// derived generator, so events do not depend on each other.
std::vector<PropagationEvent> generate_domain(const DomainSpec& spec);

/// Target-domain spec: rotated/translated means, scaled noise and sizes, shifted
/// branching, and a seed derived from the source seed.
DomainSpec apply_shift(const DomainSpec& spec, const ShiftSpec& shift);

std::uint64_t target_seed(std::uint64_t source_seed);

struct BenchmarkPreset {
    DomainSpec source;
    ShiftSpec shift;
    int num_train = 400;
    int num_val = 100;
    int num_test = 100;
};

/// "shift-mid": d=8, separation 2, noise 1, 10-60 nodes, 400/100 events,
/// rotation pi/3, noise x1.25, size x1.5.
BenchmarkPreset shift_mid_preset(std::uint64_t seed);

struct BenchmarkData {
    std::vector<PropagationEvent> train;
    std::vector<PropagationEvent> val;
    std::vector<PropagationEvent> test;
};

BenchmarkData generate_benchmark(const BenchmarkPreset& preset);

/// JSON Lines, one event per line: {"id", "label", "edges", "features"}.
std::string dataset_to_jsonl(std::span<const PropagationEvent> events);
std::vector<PropagationEvent> dataset_from_jsonl(const std::string& text);
void write_dataset(std::span<const PropagationEvent> events, const std::filesystem::path& path);
/// Errors name the 1-based line number.
std::vector<PropagationEvent> read_dataset(const std::filesystem::path& path);

} // namespace tard

#endif // TARD_DATAGEN_HPP
