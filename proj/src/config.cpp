#include "tard/config.hpp"

#include "tard/checkpoint.hpp"

namespace tard {

ExperimentConfig default_experiment_config()
{
    return ExperimentConfig{};
}

void apply_seed(ExperimentConfig& config, std::uint64_t seed)
{
    config.data.source.seed = seed;
    config.train.seed = seed;
    config.seeds = {seed};
}

void validate(const ExperimentConfig& c)
{
    DomainSpec source = c.data.source;
    validate(source);
    validate(c.data.shift, source.feature_dim);
    if (c.data.num_train < 1 || c.data.num_val < 0 || c.data.num_test < 1)
        throw std::invalid_argument("config: need num_train >= 1, num_val >= 0, num_test >= 1");
    validate(c.train);
    if (c.seeds.empty())
        throw std::invalid_argument("config: seeds must not be empty");
}

nlohmann::json to_json(const ExperimentConfig& c)
{
    return {
        {"source", to_json(c.data.source)},
        {"shift", to_json(c.data.shift)},
        {"num_train", c.data.num_train},
        {"num_val", c.data.num_val},
        {"num_test", c.data.num_test},
        {"train", to_json(c.train)},
        {"seeds", c.seeds},
        {"data_dir", c.data_dir.string()},
        {"out_dir", c.out_dir.string()},
    };
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c)
{
    if (!j.is_object())
        throw std::invalid_argument("config: top level must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "source") c.data.source = domain_spec_from_json(v, c.data.source);
            else if (key == "shift") c.data.shift = shift_spec_from_json(v, c.data.shift);
            else if (key == "num_train") c.data.num_train = v.get<int>();
            else if (key == "num_val") c.data.num_val = v.get<int>();
            else if (key == "num_test") c.data.num_test = v.get<int>();
            else if (key == "train") c.train = train_config_from_json(v, c.train);
            else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
            else if (key == "data_dir") c.data_dir = v.get<std::string>();
            else if (key == "out_dir") c.out_dir = v.get<std::string>();
            else throw std::invalid_argument("config: unknown field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    return experiment_config_from_json(read_json_file(path));
}

} // namespace tard
