#include "support.hpp"

#include "tard/checkpoint.hpp"
#include "tard/datagen.hpp"
#include "tard/pipeline.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

using namespace tard;
using namespace tard::testing;

namespace {

bool is_rooted_tree(const PropagationEvent& ev)
{
    if (ev.edges.size() != static_cast<std::size_t>(ev.num_nodes - 1))
        return false;
    std::vector<int> parent(static_cast<std::size_t>(ev.num_nodes), -1);
    for (const auto& e : ev.edges) {
        if (e.child <= 0 || e.child >= ev.num_nodes || parent[static_cast<std::size_t>(e.child)] != -1)
            return false;
        parent[static_cast<std::size_t>(e.child)] = e.parent;
    }
    // Every node must reach the root without revisiting anything.
    for (int v = 1; v < ev.num_nodes; ++v) {
        int u = v, hops = 0;
        while (u != 0 && hops <= ev.num_nodes) {
            u = parent[static_cast<std::size_t>(u)];
            ++hops;
            if (u < 0)
                return false;
        }
        if (u != 0)
            return false;
    }
    return true;
}

double accuracy(std::span<const LabeledGraph> data, const TardParams& params)
{
    int correct = 0;
    for (const auto& item : data)
        correct += predict(item.graph, params).label == item.label;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainConfig fast_training(std::uint64_t seed)
{
    TrainConfig c;
    c.epochs = 15;
    c.seed = seed;
    c.alpha1 = 0.0;
    return c;
}

} // namespace

TEST(GenerateDomain, EdgesFormRootedTrees)
{
    Rng rng(1);
    for (int trial = 0; trial < 12; ++trial) {
        DomainSpec spec;
        spec.num_events = 30;
        spec.min_nodes = 1;
        spec.max_nodes = 2 + trial * 5;
        spec.branching_bias = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        spec.homophily = trial % 2 ? 0.6 : 0.0;
        spec.seed = rng();
        for (const auto& ev : generate_domain(spec)) {
            EXPECT_TRUE(is_rooted_tree(ev)) << ev.id;
            EXPECT_GE(ev.num_nodes, spec.min_nodes);
            EXPECT_LE(ev.num_nodes, spec.max_nodes);
            EXPECT_EQ(ev.features.rows(), ev.num_nodes);
            validate_event(ev);
        }
    }
}

TEST(GenerateDomain, ClassCountsWithinBinomialBounds)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DomainSpec spec;
        spec.seed = seed;
        spec.max_nodes = 15;
        const auto events = generate_domain(spec);
        ASSERT_EQ(events.size(), 400u);
        const auto ones = std::count_if(events.begin(), events.end(), [](const auto& e) { return e.label == 1; });
        EXPECT_GE(ones, 160);
        EXPECT_LE(ones, 240);
    }
}

TEST(GenerateDomain, DeterministicBytes)
{
    DomainSpec spec;
    spec.num_events = 50;
    spec.seed = 17;
    spec.topic_noise_std = 0.5;
    spec.homophily = 0.3;
    EXPECT_EQ(dataset_to_jsonl(generate_domain(spec)), dataset_to_jsonl(generate_domain(spec)));
    auto other = spec;
    other.seed = 18;
    EXPECT_NE(dataset_to_jsonl(generate_domain(spec)), dataset_to_jsonl(generate_domain(other)));
}

TEST(GenerateDomain, BranchingBiasShapesTrees)
{
    // Star-leaning trees have more depth-one nodes than chain-leaning ones.
    auto root_children = [](double b) {
        DomainSpec spec;
        spec.num_events = 100;
        spec.branching_bias = b;
        spec.structure_signal_strength = 0.0;
        long total = 0;
        for (const auto& ev : generate_domain(spec))
            total += std::count_if(ev.edges.begin(), ev.edges.end(), [](const Edge& e) { return e.parent == 0; });
        return total;
    };
    EXPECT_GT(root_children(0.9), 2 * root_children(0.1));
}

TEST(GenerateDomain, RejectsBadSpecs)
{
    DomainSpec spec;
    spec.min_nodes = 0;
    EXPECT_THROW(generate_domain(spec), std::invalid_argument);
    spec = {};
    spec.max_nodes = 5;
    EXPECT_THROW(generate_domain(spec), std::invalid_argument);
    spec = {};
    spec.class_balance = 1.5;
    EXPECT_THROW(generate_domain(spec), std::invalid_argument);
    spec = {};
    spec.mean_translation = {1.0};
    EXPECT_THROW(generate_domain(spec), std::invalid_argument);
}

TEST(ClassMeans, AntipodalAndRotated)
{
    DomainSpec spec;
    spec.feature_dim = 2;
    spec.mean_rotation = std::numbers::pi / 2;
    const Matrix m = class_means(spec);
    EXPECT_NEAR(m(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(m(0, 1), -1.0, 1e-15);
    EXPECT_NEAR(m(1, 1), 1.0, 1e-15);
}

TEST(ApplyShift, IdentityOnlyChangesSeed)
{
    DomainSpec spec;
    spec.seed = 5;
    const auto target = apply_shift(spec, ShiftSpec{});
    EXPECT_NE(target.seed, spec.seed);
    EXPECT_EQ(target.seed, target_seed(spec.seed));
    auto same = target;
    same.seed = spec.seed;
    EXPECT_EQ(same, spec);
}

TEST(ApplyShift, ComposesKnobs)
{
    DomainSpec spec;
    spec.feature_dim = 3;
    spec.mean_rotation = 0.25;
    ShiftSpec shift;
    shift.rotation_angle = 0.5;
    shift.mean_translation = {1.0, 0.0, -1.0};
    shift.noise_scale_factor = 2.0;
    shift.size_scale_factor = 1.5;
    shift.branching_shift = 0.8;
    const auto t = apply_shift(spec, shift);
    EXPECT_DOUBLE_EQ(t.mean_rotation, 0.75);
    EXPECT_EQ(t.mean_translation, shift.mean_translation);
    EXPECT_DOUBLE_EQ(t.feature_noise_std, 2.0);
    EXPECT_EQ(t.min_nodes, 15);
    EXPECT_EQ(t.max_nodes, 90);
    EXPECT_DOUBLE_EQ(t.branching_bias, 1.0);
    shift.mean_translation = {1.0};
    EXPECT_THROW(apply_shift(spec, shift), std::invalid_argument);
}

TEST(ApplyShift, SizeScaleDoublesMeanNodeCount)
{
    DomainSpec spec;
    spec.num_events = 300;
    ShiftSpec shift;
    shift.size_scale_factor = 2.0;
    auto mean_nodes = [](const std::vector<PropagationEvent>& events) {
        double total = 0;
        for (const auto& ev : events)
            total += ev.num_nodes;
        return total / static_cast<double>(events.size());
    };
    const double ratio = mean_nodes(generate_domain(apply_shift(spec, shift))) / mean_nodes(generate_domain(spec));
    EXPECT_NEAR(ratio, 2.0, 0.2);
}

TEST(ApplyShift, HalfTurnSwapsClasses)
{
    DomainSpec spec;
    spec.feature_dim = 2;
    spec.num_events = 200;
    spec.max_nodes = 20;
    spec.structure_signal_strength = 0.0;
    spec.root_offset = 0.0;
    spec.class_mean_separation = 1.0;
    spec.seed = 3;
    ShiftSpec shift;
    shift.rotation_angle = std::numbers::pi;
    const auto source = prepare_graphs(generate_domain(spec), AdjacencyMode::undirected_sym);
    const auto target = prepare_graphs(generate_domain(apply_shift(spec, shift)), AdjacencyMode::undirected_sym);
    const auto model = train_phase(source, fast_training(1));
    const double src = accuracy(source, model.params);
    EXPECT_GT(src, 0.8);
    EXPECT_NEAR(accuracy(target, model.params), 1.0 - src, 0.08);
}

TEST(GenerateDomain, NoSignalMeansChanceAccuracy)
{
    DomainSpec spec;
    spec.num_events = 200;
    spec.max_nodes = 20;
    spec.class_mean_separation = 0.0;
    spec.structure_signal_strength = 0.0;
    spec.class_balance = 0.5;
    spec.seed = 4;
    const auto train = prepare_graphs(generate_domain(spec), AdjacencyMode::undirected_sym);
    spec.seed = 5;
    spec.num_events = 400;
    const auto fresh = prepare_graphs(generate_domain(spec), AdjacencyMode::undirected_sym);
    const auto model = train_phase(train, fast_training(2));
    EXPECT_NEAR(accuracy(fresh, model.params), 0.5, 0.08);
}

TEST(ApplyShift, RotationWeaklyDegradesFrozenModel)
{
    const std::vector<double> grid = {0.0, std::numbers::pi / 8, std::numbers::pi / 4, 3 * std::numbers::pi / 8,
                                      std::numbers::pi / 2};
    std::vector<double> mean_acc(grid.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DomainSpec spec;
        spec.num_events = 150;
        spec.max_nodes = 20;
        spec.structure_signal_strength = 0.0;
        spec.seed = seed;
        const auto model = train_phase(prepare_graphs(generate_domain(spec), AdjacencyMode::undirected_sym),
                                       fast_training(seed));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            ShiftSpec shift;
            shift.rotation_angle = grid[k];
            auto target = apply_shift(spec, shift);
            target.num_events = 200;
            mean_acc[k] += accuracy(prepare_graphs(generate_domain(target), AdjacencyMode::undirected_sym),
                                    model.params) / 5.0;
        }
    }
    int inversions = 0;
    for (std::size_t k = 1; k < grid.size(); ++k)
        inversions += mean_acc[k] > mean_acc[k - 1];
    EXPECT_LE(inversions, 1);
    EXPECT_LT(mean_acc.back(), mean_acc.front());
}

TEST(Benchmark, SplitsAndPrefixes)
{
    auto preset = shift_mid_preset(2);
    preset.num_train = 20;
    preset.num_val = 5;
    preset.num_test = 7;
    const auto data = generate_benchmark(preset);
    EXPECT_EQ(data.train.size(), 20u);
    EXPECT_EQ(data.val.size(), 5u);
    EXPECT_EQ(data.test.size(), 7u);
    EXPECT_EQ(data.train.front().id.rfind("train", 0), 0u);
    EXPECT_EQ(data.test.front().id.rfind("test", 0), 0u);
    EXPECT_NE(data.train.front().features, data.val.front().features);
}

TEST(Jsonl, RoundTripIsStructurallyEqual)
{
    DomainSpec spec;
    spec.num_events = 25;
    const auto events = generate_domain(spec);
    EXPECT_EQ(dataset_from_jsonl(dataset_to_jsonl(events)), events);
}

TEST(Jsonl, ErrorsNameTheLine)
{
    DomainSpec spec;
    spec.num_events = 3;
    auto text = dataset_to_jsonl(generate_domain(spec));
    const auto cut = text.rfind('\n', text.size() - 2);
    const auto truncated = text.substr(0, cut + 20);
    try {
        dataset_from_jsonl(truncated);
        FAIL() << "truncated input parsed";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(dataset_from_jsonl("{\"id\":\"a\",\"label\":0}\n"), FormatError);
}

TEST(Jsonl, RejectsMixedFeatureDimensions)
{
    DomainSpec a, b;
    a.num_events = b.num_events = 2;
    b.feature_dim = 4;
    auto events = generate_domain(a);
    const auto more = generate_domain(b);
    events.push_back(more.front());
    EXPECT_THROW(dataset_from_jsonl(dataset_to_jsonl(events)), FormatError);
}

TEST(Jsonl, FourHundredEventsUnderOneSecond)
{
    const auto events = generate_domain(DomainSpec{});
    const auto path = std::filesystem::temp_directory_path() / "tard_jsonl_timing.jsonl";
    const auto start = std::chrono::steady_clock::now();
    write_dataset(events, path);
    const auto back = read_dataset(path);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    EXPECT_EQ(back, events);
    EXPECT_LT(took.count(), 1.0);
    std::filesystem::remove(path);
}

TEST(SpecJson, RoundTripAndUnknownKeys)
{
    DomainSpec spec;
    spec.mean_translation = std::vector<double>(8, 0.5);
    spec.homophily = 0.2;
    EXPECT_EQ(domain_spec_from_json(to_json(spec)), spec);
    ShiftSpec shift;
    shift.rotation_angle = 1.0;
    EXPECT_EQ(to_json(shift_spec_from_json(to_json(shift))), to_json(shift));
    auto j = to_json(spec);
    j["colour"] = 1;
    EXPECT_THROW(domain_spec_from_json(j), std::invalid_argument);
}
