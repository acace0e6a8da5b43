#include "tard/datagen.hpp"

#include "tard/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace tard {

namespace {

constexpr std::uint64_t kTargetStream = 0x5441524745540001ULL;

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

RowVector translation_or_zero(const std::vector<double>& t, int d)
{
    RowVector v = RowVector::Zero(d);
    for (std::size_t i = 0; i < t.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = t[i];
    return v;
}

int pick_parent(Rng& rng, double bias, const std::vector<int>& children, int newest)
{
    // Mixture of attaching to the root (star), to the newest node (chain) and
    // to a node chosen proportionally to its child count + 1 (hubs).
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    const double p_root = bias * bias;
    const double p_pref = 2.0 * bias * (1.0 - bias);
    if (r < p_root)
        return 0;
    if (r >= p_root + p_pref)
        return newest;
    std::vector<double> weights(static_cast<std::size_t>(newest) + 1);
    for (int j = 0; j <= newest; ++j)
        weights[static_cast<std::size_t>(j)] = children[static_cast<std::size_t>(j)] + 1.0;
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    return pick(rng);
}

PropagationEvent event_from_json(const nlohmann::json& j)
{
    PropagationEvent e;
    e.id = j.at("id").get<std::string>();
    e.label = j.at("label").get<int>();
    for (const auto& pair : j.at("edges")) {
        if (!pair.is_array() || pair.size() != 2)
            throw FormatError("edge entries must be [parent, child] pairs");
        e.edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
    }
    const auto& rows = j.at("features");
    if (!rows.is_array() || rows.empty())
        throw FormatError("features must be a non-empty array of rows");
    const auto d = rows[0].size();
    if (d == 0)
        throw FormatError("feature rows must be non-empty");
    e.num_nodes = static_cast<int>(rows.size());
    e.features.resize(e.num_nodes, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d)
            throw FormatError("feature row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                              " values, expected " + std::to_string(d));
        for (std::size_t k = 0; k < d; ++k)
            e.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
    }
    return e;
}

} // namespace

void validate(const DomainSpec& s)
{
    require(s.num_events >= 0, "domain spec: num_events must be >= 0");
    require(s.class_balance >= 0 && s.class_balance <= 1, "domain spec: class_balance must be in [0, 1]");
    require(s.feature_dim >= 2, "domain spec: feature_dim must be >= 2");
    require(std::isfinite(s.class_mean_separation) && s.class_mean_separation >= 0,
            "domain spec: class_mean_separation must be >= 0");
    require(std::isfinite(s.feature_noise_std) && s.feature_noise_std > 0, "domain spec: feature_noise_std must be > 0");
    require(s.min_nodes >= 1 && s.max_nodes >= s.min_nodes, "domain spec: need 1 <= min_nodes <= max_nodes");
    require(s.branching_bias >= 0 && s.branching_bias <= 1, "domain spec: branching_bias must be in [0, 1]");
    require(std::isfinite(s.structure_signal_strength) && s.structure_signal_strength >= 0,
            "domain spec: structure_signal_strength must be >= 0");
    require(std::isfinite(s.root_offset), "domain spec: root_offset must be finite");
    require(std::isfinite(s.topic_noise_std) && s.topic_noise_std >= 0, "domain spec: topic_noise_std must be >= 0");
    require(s.homophily >= 0 && s.homophily < 1, "domain spec: homophily must be in [0, 1)");
    require(std::isfinite(s.mean_rotation), "domain spec: mean_rotation must be finite");
    require(s.mean_translation.empty() || static_cast<int>(s.mean_translation.size()) == s.feature_dim,
            "domain spec: mean_translation must be empty or have feature_dim entries");
    for (double v : s.mean_translation)
        require(std::isfinite(v), "domain spec: mean_translation must be finite");
}

void validate(const ShiftSpec& s, int feature_dim)
{
    require(std::isfinite(s.rotation_angle), "shift spec: rotation_angle must be finite");
    require(s.mean_translation.empty() || static_cast<int>(s.mean_translation.size()) == feature_dim,
            "shift spec: mean_translation must be empty or have feature_dim entries");
    for (double v : s.mean_translation)
        require(std::isfinite(v), "shift spec: mean_translation must be finite");
    require(std::isfinite(s.noise_scale_factor) && s.noise_scale_factor > 0, "shift spec: noise_scale_factor must be > 0");
    require(std::isfinite(s.size_scale_factor) && s.size_scale_factor > 0, "shift spec: size_scale_factor must be > 0");
    require(std::isfinite(s.branching_shift), "shift spec: branching_shift must be finite");
}

nlohmann::json to_json(const DomainSpec& s)
{
    return {
        {"num_events", s.num_events},
        {"class_balance", s.class_balance},
        {"feature_dim", s.feature_dim},
        {"class_mean_separation", s.class_mean_separation},
        {"feature_noise_std", s.feature_noise_std},
        {"min_nodes", s.min_nodes},
        {"max_nodes", s.max_nodes},
        {"branching_bias", s.branching_bias},
        {"structure_signal_strength", s.structure_signal_strength},
        {"root_offset", s.root_offset},
        {"topic_noise_std", s.topic_noise_std},
        {"homophily", s.homophily},
        {"mean_rotation", s.mean_rotation},
        {"mean_translation", s.mean_translation},
        {"seed", s.seed},
        {"id_prefix", s.id_prefix},
    };
}

DomainSpec domain_spec_from_json(const nlohmann::json& j, DomainSpec s)
{
    require(j.is_object(), "domain spec must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "num_events") s.num_events = v.get<int>();
        else if (key == "class_balance") s.class_balance = v.get<double>();
        else if (key == "feature_dim") s.feature_dim = v.get<int>();
        else if (key == "class_mean_separation") s.class_mean_separation = v.get<double>();
        else if (key == "feature_noise_std") s.feature_noise_std = v.get<double>();
        else if (key == "min_nodes") s.min_nodes = v.get<int>();
        else if (key == "max_nodes") s.max_nodes = v.get<int>();
        else if (key == "branching_bias") s.branching_bias = v.get<double>();
        else if (key == "structure_signal_strength") s.structure_signal_strength = v.get<double>();
        else if (key == "root_offset") s.root_offset = v.get<double>();
        else if (key == "topic_noise_std") s.topic_noise_std = v.get<double>();
        else if (key == "homophily") s.homophily = v.get<double>();
        else if (key == "mean_rotation") s.mean_rotation = v.get<double>();
        else if (key == "mean_translation") s.mean_translation = v.get<std::vector<double>>();
        else if (key == "seed") s.seed = v.get<std::uint64_t>();
        else if (key == "id_prefix") s.id_prefix = v.get<std::string>();
        else throw std::invalid_argument("domain spec: unknown field '" + key + "'");
    }
    return s;
}

nlohmann::json to_json(const ShiftSpec& s)
{
    return {
        {"rotation_angle", s.rotation_angle},
        {"mean_translation", s.mean_translation},
        {"noise_scale_factor", s.noise_scale_factor},
        {"size_scale_factor", s.size_scale_factor},
        {"branching_shift", s.branching_shift},
    };
}

ShiftSpec shift_spec_from_json(const nlohmann::json& j, ShiftSpec s)
{
    require(j.is_object(), "shift spec must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "rotation_angle") s.rotation_angle = v.get<double>();
        else if (key == "mean_translation") s.mean_translation = v.get<std::vector<double>>();
        else if (key == "noise_scale_factor") s.noise_scale_factor = v.get<double>();
        else if (key == "size_scale_factor") s.size_scale_factor = v.get<double>();
        else if (key == "branching_shift") s.branching_shift = v.get<double>();
        else throw std::invalid_argument("shift spec: unknown field '" + key + "'");
    }
    return s;
}

Matrix class_means(const DomainSpec& spec)
{
    const int d = spec.feature_dim;
    Matrix means = Matrix::Zero(2, d);
    const double half = spec.class_mean_separation / 2.0;
    const double c = std::cos(spec.mean_rotation), s = std::sin(spec.mean_rotation);
    for (int y = 0; y < 2; ++y) {
        const double sign = y == 1 ? 1.0 : -1.0;
        means(y, 0) = sign * half * c;
        means(y, 1) = sign * half * s;
    }
    means.rowwise() += translation_or_zero(spec.mean_translation, d);
    return means;
}

double class_branching_bias(const DomainSpec& spec, int label)
{
    const double tilt = 0.25 * spec.structure_signal_strength * (label == 1 ? 1.0 : -1.0);
    return std::clamp(spec.branching_bias + tilt, 0.0, 1.0);
}

std::vector<PropagationEvent> generate_domain(const DomainSpec& spec)
{
    validate(spec);
    const Matrix means = class_means(spec);
    const int d = spec.feature_dim;
    std::vector<PropagationEvent> events;
    events.reserve(static_cast<std::size_t>(spec.num_events));
    for (int k = 0; k < spec.num_events; ++k) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(k)));
        PropagationEvent e;
        e.id = spec.id_prefix + "-" + std::to_string(k);
        e.label = std::bernoulli_distribution(spec.class_balance)(rng) ? 1 : 0;
        e.num_nodes = std::uniform_int_distribution<int>(spec.min_nodes, spec.max_nodes)(rng);

        const double bias = class_branching_bias(spec, e.label);
        std::vector<int> children(static_cast<std::size_t>(e.num_nodes), 0);
        for (int node = 1; node < e.num_nodes; ++node) {
            const int parent = pick_parent(rng, bias, children, node - 1);
            ++children[static_cast<std::size_t>(parent)];
            e.edges.push_back({parent, node});
        }

        std::normal_distribution<double> unit(0.0, 1.0);
        RowVector topic(d);
        for (int c = 0; c < d; ++c)
            topic(c) = spec.topic_noise_std * unit(rng);
        // Posts are numbered so parents precede children.
        Matrix noise(e.num_nodes, d);
        const double fresh = std::sqrt(1.0 - spec.homophily * spec.homophily);
        for (int i = 0; i < e.num_nodes; ++i)
            for (int c = 0; c < d; ++c)
                noise(i, c) = spec.feature_noise_std * unit(rng);
        for (const auto& edge : e.edges)
            noise.row(edge.child) = spec.homophily * noise.row(edge.parent) + fresh * noise.row(edge.child);
        e.features = (noise.rowwise() + (means.row(e.label) + topic)).eval();
        e.features(0, d - 1) += spec.root_offset;
        events.push_back(std::move(e));
    }
    return events;
}

std::uint64_t target_seed(std::uint64_t source_seed)
{
    return derive_seed(source_seed, kTargetStream);
}

DomainSpec apply_shift(const DomainSpec& spec, const ShiftSpec& shift)
{
    validate(spec);
    validate(shift, spec.feature_dim);
    DomainSpec t = spec;
    t.seed = target_seed(spec.seed);
    if (shift.rotation_angle != 0.0)
        t.mean_rotation = spec.mean_rotation + shift.rotation_angle;
    const bool translates = std::any_of(shift.mean_translation.begin(), shift.mean_translation.end(),
                                        [](double v) { return v != 0.0; });
    if (translates) {
        const RowVector moved = translation_or_zero(spec.mean_translation, spec.feature_dim) +
                                translation_or_zero(shift.mean_translation, spec.feature_dim);
        t.mean_translation.assign(moved.data(), moved.data() + moved.size());
    }
    t.feature_noise_std = spec.feature_noise_std * shift.noise_scale_factor;
    t.topic_noise_std = spec.topic_noise_std * shift.noise_scale_factor;
    if (shift.size_scale_factor != 1.0) {
        t.min_nodes = std::max(1, static_cast<int>(std::lround(spec.min_nodes * shift.size_scale_factor)));
        t.max_nodes = std::max(t.min_nodes, static_cast<int>(std::lround(spec.max_nodes * shift.size_scale_factor)));
    }
    if (shift.branching_shift != 0.0)
        t.branching_bias = std::clamp(spec.branching_bias + shift.branching_shift, 0.0, 1.0);
    return t;
}

BenchmarkPreset shift_mid_preset(std::uint64_t seed)
{
    BenchmarkPreset p;
    p.source.feature_dim = 8;
    p.source.class_mean_separation = 2.0;
    p.source.feature_noise_std = 1.0;
    p.source.min_nodes = 10;
    p.source.max_nodes = 60;
    p.source.topic_noise_std = 0.5;
    p.source.homophily = 0.8;
    p.source.seed = seed;
    p.shift.rotation_angle = std::numbers::pi / 3.0;
    p.shift.noise_scale_factor = 1.25;
    p.shift.size_scale_factor = 1.5;
    p.num_train = 400;
    p.num_val = 100;
    p.num_test = 100;
    return p;
}

BenchmarkData generate_benchmark(const BenchmarkPreset& preset)
{
    BenchmarkData data;
    DomainSpec train = preset.source;
    train.num_events = preset.num_train;
    train.id_prefix = "train";
    data.train = generate_domain(train);

    DomainSpec val = preset.source;
    val.num_events = preset.num_val;
    val.seed = derive_seed(preset.source.seed, 0x56414c);
    val.id_prefix = "val";
    data.val = generate_domain(val);

    DomainSpec test = apply_shift(preset.source, preset.shift);
    test.num_events = preset.num_test;
    test.id_prefix = "test";
    data.test = generate_domain(test);
    return data;
}

std::string dataset_to_jsonl(std::span<const PropagationEvent> events)
{
    std::string out;
    for (const auto& e : events) {
        validate_event(e);
        nlohmann::json j;
        j["id"] = e.id;
        j["label"] = e.label;
        auto& edges = j["edges"] = nlohmann::json::array();
        for (const auto& edge : e.edges)
            edges.push_back({edge.parent, edge.child});
        auto& rows = j["features"] = nlohmann::json::array();
        for (Eigen::Index i = 0; i < e.features.rows(); ++i)
            rows.push_back(std::vector<double>(e.features.row(i).data(), e.features.row(i).data() + e.features.cols()));
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<PropagationEvent> dataset_from_jsonl(const std::string& text)
{
    std::vector<PropagationEvent> events;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    Eigen::Index dim = -1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        PropagationEvent e;
        try {
            e = event_from_json(nlohmann::json::parse(line));
            validate_event(e);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(where + ex.what());
        } catch (const std::exception& ex) {
            throw FormatError(where + ex.what());
        }
        if (dim < 0)
            dim = e.features.cols();
        else if (e.features.cols() != dim)
            throw FormatError(where + "feature dimension " + std::to_string(e.features.cols()) +
                              " differs from earlier events (" + std::to_string(dim) + ")");
        events.push_back(std::move(e));
    }
    return events;
}

void write_dataset(std::span<const PropagationEvent> events, const std::filesystem::path& path)
{
    write_text_file(path, dataset_to_jsonl(events));
}

std::vector<PropagationEvent> read_dataset(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return dataset_from_jsonl(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace tard
