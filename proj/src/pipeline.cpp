#include "tard/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace tard {

namespace {

// Stream ids for the independent generators used while training.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kOrderStream = 2;
constexpr std::uint64_t kAugmentStream = 3;

ModelDims dims_for(const TrainConfig& config, int d_in, int num_classes)
{
    ModelDims d;
    d.d_in = d_in;
    d.d_hidden = config.d_hidden;
    d.num_classes = num_classes;
    d.shared_layers = config.shared_layers;
    d.main_layers = config.main_layers;
    d.ssl_layers = config.ssl_layers;
    return d;
}

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument("train config: " + what);
}

struct AdaptationValues {
    double ssl = 0;
    double constraint = 0;
};

AdaptationValues adaptation_values(const PropGraph& graph, const TardParams& params, const EmbeddingStats& train_stats,
                                   std::span<const int> permutation)
{
    const auto f = forward_ssl(graph, params, permutation);
    AdaptationValues v;
    v.ssl = contrastive_loss<double>(f.h0, f.h1, f.g0).value;
    v.constraint = constraint_loss(train_stats, embedding_stats(f.shared_original.embeddings));
    return v;
}

EventRecord make_record(const LabeledGraph& item, const Prediction& p)
{
    EventRecord r;
    r.id = item.id;
    r.true_label = item.label;
    r.predicted = p.label;
    r.probabilities.assign(p.probabilities.data(), p.probabilities.data() + p.probabilities.size());
    return r;
}

EventRecord adapt_and_predict(const LabeledGraph& item, const TardParams& start, const TrainedModel& model,
                              const TrainConfig& config, TardParams* carried)
{
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = event_rng(config.seed, item.id);
    auto adapted = ttt_adapt(item.graph, start, model.train_stats, config, rng);
    EventRecord r = make_record(item, predict(item.graph, adapted.params));
    r.ssl_before = adapted.ssl_before;
    r.ssl_after = adapted.ssl_after;
    r.constraint_before = adapted.constraint_before;
    r.constraint_after = adapted.constraint_after;
    r.steps = adapted.steps;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (carried)
        *carried = std::move(adapted.params);
    return r;
}

EvalResult finish(std::vector<EventRecord> records, const TrainedModel& model, const TrainConfig& config)
{
    std::vector<LabelPair> pairs;
    pairs.reserve(records.size());
    for (const auto& r : records)
        pairs.push_back({r.true_label, r.predicted});
    EvalResult out;
    out.metrics = compute_metrics(pairs, model.params.dims.num_classes);
    out.metrics.seed = config.seed;
    out.records = std::move(records);
    return out;
}

nlohmann::json stats_to_json(const EmbeddingStats& s)
{
    return {{"mu", matrix_to_json(s.mu)}, {"eta", matrix_to_json(s.eta)}, {"count", s.count}};
}

EmbeddingStats stats_from_json(const nlohmann::json& j)
{
    EmbeddingStats s;
    s.mu = matrix_from_json(j.at("mu"));
    s.eta = matrix_from_json(j.at("eta"));
    s.count = j.at("count").get<Eigen::Index>();
    return s;
}

} // namespace

std::string to_string(AdaptationMode mode)
{
    return mode == AdaptationMode::episodic ? "episodic" : "online";
}

AdaptationMode adaptation_mode_from_string(const std::string& s)
{
    if (s == "episodic")
        return AdaptationMode::episodic;
    if (s == "online")
        return AdaptationMode::online;
    throw std::invalid_argument("unknown adaptation mode '" + s + "' (expected episodic or online)");
}

std::string to_string(AdjacencyMode mode)
{
    return mode == AdjacencyMode::undirected_sym ? "undirected-sym-norm" : "directed-row-norm";
}

AdjacencyMode adjacency_mode_from_string(const std::string& s)
{
    if (s == "undirected-sym-norm")
        return AdjacencyMode::undirected_sym;
    if (s == "directed-row-norm")
        return AdjacencyMode::directed_row;
    throw std::invalid_argument("unknown adjacency mode '" + s + "'");
}

void validate(const TrainConfig& c)
{
    require(std::isfinite(c.alpha1) && c.alpha1 >= 0, "alpha1 must be finite and >= 0");
    require(std::isfinite(c.alpha2) && c.alpha2 >= 0, "alpha2 must be finite and >= 0");
    require(c.epochs >= 1, "epochs must be >= 1");
    require(c.patience >= 1, "patience must be >= 1");
    require(std::isfinite(c.min_delta) && c.min_delta >= 0, "min_delta must be finite and >= 0");
    require(std::isfinite(c.train_lr) && c.train_lr > 0, "train_lr must be finite and > 0");
    require(std::isfinite(c.ttt_lr) && c.ttt_lr > 0, "ttt_lr must be finite and > 0");
    require(c.ttt_steps >= 0, "ttt_steps must be >= 0");
    require(c.d_hidden >= 1, "d_hidden must be >= 1");
    require(c.shared_layers >= 1 && c.main_layers >= 1 && c.ssl_layers >= 1, "layer counts must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c)
{
    return {
        {"alpha1", c.alpha1},
        {"alpha2", c.alpha2},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"min_delta", c.min_delta},
        {"train_lr", c.train_lr},
        {"ttt_lr", c.ttt_lr},
        {"ttt_steps", c.ttt_steps},
        {"mode", to_string(c.mode)},
        {"seed", c.seed},
        {"d_hidden", c.d_hidden},
        {"shared_layers", c.shared_layers},
        {"main_layers", c.main_layers},
        {"ssl_layers", c.ssl_layers},
        {"adjacency", to_string(c.adjacency)},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c)
{
    if (!j.is_object())
        throw std::invalid_argument("train config must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "alpha1") c.alpha1 = value.get<double>();
        else if (key == "alpha2") c.alpha2 = value.get<double>();
        else if (key == "epochs") c.epochs = value.get<int>();
        else if (key == "patience") c.patience = value.get<int>();
        else if (key == "min_delta") c.min_delta = value.get<double>();
        else if (key == "train_lr") c.train_lr = value.get<double>();
        else if (key == "ttt_lr") c.ttt_lr = value.get<double>();
        else if (key == "ttt_steps") c.ttt_steps = value.get<int>();
        else if (key == "mode") c.mode = adaptation_mode_from_string(value.get<std::string>());
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "d_hidden") c.d_hidden = value.get<int>();
        else if (key == "shared_layers") c.shared_layers = value.get<int>();
        else if (key == "main_layers") c.main_layers = value.get<int>();
        else if (key == "ssl_layers") c.ssl_layers = value.get<int>();
        else if (key == "adjacency") c.adjacency = adjacency_mode_from_string(value.get<std::string>());
        else throw std::invalid_argument("train config: unknown field '" + key + "'");
    }
    return c;
}

std::vector<LabeledGraph> prepare_graphs(std::span<const PropagationEvent> events, AdjacencyMode mode)
{
    std::vector<LabeledGraph> out;
    out.reserve(events.size());
    for (const auto& e : events)
        out.push_back({e.id, e.label, to_prop_graph(e, mode)});
    return out;
}

TrainedModel train_phase(std::span<const LabeledGraph> train_set, const TrainConfig& config,
                         const StepObserver& observer)
{
    validate(config);
    if (train_set.empty())
        throw std::invalid_argument("train_phase: empty training set");
    const auto d_in = static_cast<int>(train_set.front().graph.features.cols());
    int num_classes = 2;
    for (const auto& item : train_set) {
        if (item.graph.features.cols() != d_in)
            throw DimensionError("train_phase: event '" + item.id + "' has feature dimension " +
                                 std::to_string(item.graph.features.cols()) + ", expected " + std::to_string(d_in));
        if (item.label < 0)
            throw std::invalid_argument("train_phase: event '" + item.id + "' has a negative label");
        num_classes = std::max(num_classes, item.label + 1);
    }

    Rng init_rng(derive_seed(config.seed, kInitStream));
    Rng order_rng(derive_seed(config.seed, kOrderStream));
    Rng augment_rng(derive_seed(config.seed, kAugmentStream));

    TrainedModel model;
    model.config = config;
    model.params = init_params(dims_for(config, d_in, num_classes), init_rng);
    auto& params = model.params;
    auto all = parameter_group(params, kAllGroups);
    OptimizerState state(AdamOptions<double>{config.train_lr});

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    std::int64_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = random_permutation(static_cast<int>(train_set.size()), order_rng);
        EpochLog entry;
        for (int idx : order) {
            const auto& item = train_set[static_cast<std::size_t>(idx)];
            zero_grad(params);
            entry.main_loss += main_loss(item.graph, item.label, params, 1.0);
            if (config.alpha1 != 0.0)
                entry.ssl_loss += ssl_loss(item.graph, params, augment_rng, config.alpha1);
            adam_step<double>(all, state);
            if (!params_finite(params))
                throw std::runtime_error("train_phase: non-finite parameters at step " + std::to_string(step));
            if (observer)
                observer(step, params);
            ++step;
        }
        entry.main_loss /= static_cast<double>(train_set.size());
        entry.ssl_loss /= static_cast<double>(train_set.size());
        model.log.push_back(entry);

        const double objective = entry.main_loss + config.alpha1 * entry.ssl_loss;
        if (objective < best - config.min_delta) {
            best = objective;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }

    std::vector<PropGraph> graphs;
    graphs.reserve(train_set.size());
    for (const auto& item : train_set)
        graphs.push_back(item.graph);
    model.train_stats = compute_embedding_stats(graphs, params);
    zero_grad(params);
    return model;
}

AdaptResult ttt_adapt(const PropGraph& graph, const TardParams& start, const EmbeddingStats& train_stats,
                      const TrainConfig& config, Rng& rng)
{
    AdaptResult out;
    out.params = start;
    auto& params = out.params;
    const auto probe = random_permutation(graph.num_nodes, rng);
    const auto before = adaptation_values(graph, params, train_stats, probe);
    out.ssl_before = before.ssl;
    out.constraint_before = before.constraint;

    auto trainable = parameter_group(params, kShared | kSsl);
    OptimizerState state(AdamOptions<double>{config.ttt_lr});
    for (int s = 0; s < config.ttt_steps; ++s) {
        for (auto* q : trainable)
            q->zero_grad();
        const auto perm = random_permutation(graph.num_nodes, rng);
        adaptation_loss(graph, params, train_stats, config.alpha2, perm);
        adam_step<double>(trainable, state);
        if (!params_finite(params))
            throw std::runtime_error("ttt_adapt: non-finite parameters after step " + std::to_string(s));
        ++out.steps;
    }
    for (auto* q : trainable)
        q->zero_grad();

    if (out.steps == 0) {
        out.ssl_after = out.ssl_before;
        out.constraint_after = out.constraint_before;
    } else {
        const auto after = adaptation_values(graph, params, train_stats, probe);
        out.ssl_after = after.ssl;
        out.constraint_after = after.constraint;
    }
    return out;
}

Prediction predict(const PropGraph& graph, const TardParams& params)
{
    const auto shared = forward_shared(graph, params);
    const auto head = forward_main(shared.embeddings, graph, params);
    Prediction p;
    p.probabilities = head.probabilities;
    for (Eigen::Index k = 1; k < p.probabilities.size(); ++k)
        if (p.probabilities(k) > p.probabilities(p.label))
            p.label = static_cast<int>(k);
    return p;
}

nlohmann::json to_json(const EventRecord& r)
{
    return {
        {"id", r.id},
        {"true_label", r.true_label},
        {"predicted", r.predicted},
        {"probabilities", r.probabilities},
        {"ssl_loss_before", r.ssl_before},
        {"ssl_loss_after", r.ssl_after},
        {"constraint_loss_before", r.constraint_before},
        {"constraint_loss_after", r.constraint_after},
        {"steps", r.steps},
        {"wall_seconds", r.wall_seconds},
    };
}

Rng event_rng(std::uint64_t seed, const std::string& event_id)
{
    return Rng(derive_seed(seed, fnv1a(event_id)));
}

int thread_budget()
{
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TARD_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0)
            n = n > 0 ? std::min(n, cap) : cap;
    }
    return std::max(n, 1);
}

EvalResult evaluate_episodic(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                             const TrainConfig& config)
{
    if (test_set.empty())
        throw std::invalid_argument("evaluate_episodic: empty test set");
    const auto snap = snapshot(model.params);
    std::vector<EventRecord> records(test_set.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&] {
        for (std::size_t i = next++; i < test_set.size(); i = next++) {
            try {
                records[i] = adapt_and_predict(test_set[i], snap.params(), model, config, nullptr);
            } catch (...) {
                std::lock_guard lock(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const auto workers = static_cast<std::size_t>(thread_budget());
    if (workers <= 1 || test_set.size() == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, test_set.size()); ++w)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);
    return finish(std::move(records), model, config);
}

EvalResult evaluate_episodic(std::span<const LabeledGraph> test_set, const TrainedModel& model)
{
    return evaluate_episodic(test_set, model, model.config);
}

EvalResult evaluate_online(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                           const TrainConfig& config)
{
    if (test_set.empty())
        throw std::invalid_argument("evaluate_online: empty test set");
    TardParams running = model.params;
    std::vector<EventRecord> records;
    records.reserve(test_set.size());
    for (const auto& item : test_set) {
        TardParams next;
        records.push_back(adapt_and_predict(item, running, model, config, &next));
        running = std::move(next);
    }
    return finish(std::move(records), model, config);
}

EvalResult evaluate_online(std::span<const LabeledGraph> test_set, const TrainedModel& model)
{
    return evaluate_online(test_set, model, model.config);
}

EvalResult evaluate(std::span<const LabeledGraph> test_set, const TrainedModel& model, const TrainConfig& config)
{
    return config.mode == AdaptationMode::episodic ? evaluate_episodic(test_set, model, config)
                                                   : evaluate_online(test_set, model, config);
}

EvalResult evaluate_plain(std::span<const LabeledGraph> test_set, const TardParams& params)
{
    if (test_set.empty())
        throw std::invalid_argument("evaluate_plain: empty test set");
    std::vector<EventRecord> records;
    std::vector<LabelPair> pairs;
    for (const auto& item : test_set) {
        records.push_back(make_record(item, predict(item.graph, params)));
        pairs.push_back({item.label, records.back().predicted});
    }
    EvalResult out;
    out.metrics = compute_metrics(pairs, params.dims.num_classes);
    out.records = std::move(records);
    return out;
}

nlohmann::json model_to_json(const TrainedModel& m)
{
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : m.log)
        log.push_back({{"main_loss", e.main_loss}, {"ssl_loss", e.ssl_loss}});
    const auto& d = m.params.dims;
    return {
        {"format", "tard-model"},
        {"version", 1},
        {"dims",
         {{"d_in", d.d_in},
          {"d_hidden", d.d_hidden},
          {"num_classes", d.num_classes},
          {"shared_layers", d.shared_layers},
          {"main_layers", d.main_layers},
          {"ssl_layers", d.ssl_layers}}},
        {"config", to_json(m.config)},
        {"parameters", parameters_to_json(named_values(m.params))},
        {"train_stats", stats_to_json(m.train_stats)},
        {"log", log},
    };
}

TrainedModel model_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || j.value("format", "") != "tard-model")
        throw FormatError("not a model checkpoint");
    if (j.value("version", 0) != 1)
        throw FormatError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    try {
        TrainedModel m;
        const auto& jd = j.at("dims");
        ModelDims d;
        d.d_in = jd.at("d_in").get<int>();
        d.d_hidden = jd.at("d_hidden").get<int>();
        d.num_classes = jd.at("num_classes").get<int>();
        d.shared_layers = jd.at("shared_layers").get<int>();
        d.main_layers = jd.at("main_layers").get<int>();
        d.ssl_layers = jd.at("ssl_layers").get<int>();
        validate_dims(d);
        m.config = train_config_from_json(j.at("config"));
        validate(m.config);
        m.params = params_from_named(d, parameters_from_json(j.at("parameters")));
        validate_params(m.params);
        m.train_stats = stats_from_json(j.at("train_stats"));
        require_shape(m.train_stats.mu.cols() == d.d_hidden && m.train_stats.eta.rows() == d.d_hidden &&
                          m.train_stats.eta.cols() == d.d_hidden && m.train_stats.count >= 1,
                      "checkpoint: train statistics do not match hidden width");
        for (const auto& e : j.at("log"))
            m.log.push_back({e.at("main_loss").get<double>(), e.at("ssl_loss").get<double>()});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model)
{
    write_text_file(path, model_to_json(model).dump() + "\n");
}

TrainedModel load_model(const std::filesystem::path& path)
{
    return model_from_json(read_json_file(path));
}

} // namespace tard
