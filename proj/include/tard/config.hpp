#ifndef TARD_CONFIG_HPP
#define TARD_CONFIG_HPP

#include "tard/datagen.hpp"
#include "tard/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tard {

/// Everything an experiment run needs. Every field has a default; a config file
/// overrides defaults and command-line flags override the file.
struct ExperimentConfig {
    BenchmarkPreset data = shift_mid_preset(0);
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {0};
    std::filesystem::path data_dir = "data";
    std::filesystem::path out_dir = "out";
};

ExperimentConfig default_experiment_config();

/// Sets the data seed, the training seed and the seed list to `seed`.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

/// Runs every component-level validation; throws std::invalid_argument.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);

/// Unknown keys are rejected so typos do not silently fall back to defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = default_experiment_config());
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// File names written by `tard gen` inside the data directory.
inline constexpr const char* kTrainFile = "source_train.jsonl";
inline constexpr const char* kValFile = "source_val.jsonl";
inline constexpr const char* kTestFile = "target_test.jsonl";
inline constexpr const char* kMetadataFile = "metadata.json";

} // namespace tard

#endif // TARD_CONFIG_HPP
