// Command-line driver: gen, train, eval, ablate, sweep.

#include "tard/config.hpp"
#include "tard/datagen.hpp"
#include "tard/pipeline.hpp"
#include "tard/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace tard;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha1;
    std::optional<double> alpha2;
    std::optional<int> ttt_steps;
    std::optional<double> ttt_lr;
    std::optional<std::string> mode;
    std::optional<std::string> out;
    std::optional<std::string> data;
    std::optional<int> epochs;
    std::vector<std::uint64_t> seeds;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--config", f.config_path, "JSON experiment config file");
    cmd->add_option("--seed", f.seed, "seed for data generation, training and adaptation");
    cmd->add_option("--alpha1", f.alpha1, "weight of the contrastive loss during training");
    cmd->add_option("--alpha2", f.alpha2, "weight of the statistics constraint during adaptation");
    cmd->add_option("--ttt-steps", f.ttt_steps, "adaptation steps per test event");
    cmd->add_option("--ttt-lr", f.ttt_lr, "adaptation learning rate");
    cmd->add_option("--mode", f.mode, "episodic or online adaptation")->check(CLI::IsMember({"episodic", "online"}));
    cmd->add_option("--out", f.out, "output directory (gen: where the datasets go)");
    cmd->add_option("--data", f.data, "dataset directory");
    cmd->add_option("--epochs", f.epochs, "maximum training epochs");
    cmd->add_option("--seeds", f.seeds, "seed list for ablate/sweep")->delimiter(',');
}

ExperimentConfig resolve(const CommonFlags& f)
{
    ExperimentConfig c = f.config_path.empty() ? default_experiment_config() : load_experiment_config(f.config_path);
    if (f.seed)
        apply_seed(c, *f.seed);
    if (!f.seeds.empty())
        c.seeds = f.seeds;
    if (f.alpha1)
        c.train.alpha1 = *f.alpha1;
    if (f.alpha2)
        c.train.alpha2 = *f.alpha2;
    if (f.ttt_steps)
        c.train.ttt_steps = *f.ttt_steps;
    if (f.ttt_lr)
        c.train.ttt_lr = *f.ttt_lr;
    if (f.mode)
        c.train.mode = adaptation_mode_from_string(*f.mode);
    if (f.epochs)
        c.train.epochs = *f.epochs;
    if (f.out)
        c.out_dir = *f.out;
    if (f.data)
        c.data_dir = *f.data;
    validate(c);
    return c;
}

std::string echo(const ExperimentConfig& c)
{
    const auto j = to_json(c);
    const auto hash = config_fingerprint(j);
    std::cerr << "resolved config " << hash << ":\n" << j.dump(2) << "\n";
    return hash;
}

void progress(const std::string& msg)
{
    std::cerr << "[tard] " << msg << "\n";
}

std::vector<LabeledGraph> load_graphs(const fs::path& path, AdjacencyMode mode)
{
    const auto events = read_dataset(path);
    if (events.empty())
        throw std::runtime_error("dataset '" + path.string() + "' is empty");
    return prepare_graphs(events, mode);
}

void print_row(const std::string& variant, const MetricsReport& m)
{
    std::printf("%s\t%.4f\t%.4f", variant.c_str(), m.accuracy, m.macro_f1);
    for (double f1 : m.per_class_f1)
        std::printf("\t%.4f", f1);
    std::printf("\n");
}

void print_header(int classes)
{
    std::cerr << "variant\tAcc.\tMac-F1";
    for (int k = 0; k < classes; ++k)
        std::cerr << "\tF" << k + 1;
    std::cerr << "\n";
}

void check_table(const ReportTable& table, const fs::path& csv)
{
    std::ifstream is(csv);
    std::stringstream ss;
    ss << is.rdbuf();
    if (!(table_from_csv(ss.str()) == table))
        throw std::runtime_error("written report '" + csv.string() + "' does not reparse to the same table");
}

void write_table(const ReportTable& table, const fs::path& dir, const std::string& stem)
{
    fs::create_directories(dir);
    emit_report(table, dir / (stem + ".csv"), ReportFormat::csv);
    emit_report(table, dir / (stem + ".json"), ReportFormat::json);
    emit_report(table, dir / (stem + ".svg"), ReportFormat::svg);
    check_table(table, dir / (stem + ".csv"));
    progress("wrote " + (dir / stem).string() + ".{csv,json,svg}");
}

int cmd_gen(const ExperimentConfig& c, const std::string& hash, const std::optional<std::string>& out)
{
    const fs::path dir = out ? fs::path(*out) : c.data_dir;
    fs::create_directories(dir);
    const auto data = generate_benchmark(c.data);
    write_dataset(data.train, dir / kTrainFile);
    write_dataset(data.val, dir / kValFile);
    write_dataset(data.test, dir / kTestFile);

    DomainSpec target = apply_shift(c.data.source, c.data.shift);
    nlohmann::json meta = {
        {"feature_dim", c.data.source.feature_dim},
        {"num_classes", 2},
        {"counts", {{kTrainFile, data.train.size()}, {kValFile, data.val.size()}, {kTestFile, data.test.size()}}},
        {"generator", {{"source", to_json(c.data.source)}, {"shift", to_json(c.data.shift)}, {"target", to_json(target)}}},
        {"config_fingerprint", hash},
    };
    write_text_file(dir / kMetadataFile, meta.dump(2) + "\n");

    for (const char* name : {kTrainFile, kValFile, kTestFile})
        read_dataset(dir / name);
    progress("wrote " + std::to_string(data.train.size()) + "/" + std::to_string(data.val.size()) + "/" +
             std::to_string(data.test.size()) + " events to " + dir.string());
    return 0;
}

int cmd_train(const ExperimentConfig& c, const std::string& hash)
{
    const auto train = load_graphs(fs::path(c.data_dir) / kTrainFile, c.train.adjacency);
    progress("training on " + std::to_string(train.size()) + " events");
    const auto model = train_phase(train, c.train, [&](std::int64_t step, const TardParams&) {
        if ((step + 1) % (static_cast<std::int64_t>(train.size()) * 10) == 0)
            progress("epoch " + std::to_string((step + 1) / static_cast<std::int64_t>(train.size())));
    });
    fs::create_directories(c.out_dir);
    const fs::path path = fs::path(c.out_dir) / "model.json";
    auto j = model_to_json(model);
    j["config_fingerprint"] = hash;
    write_text_file(path, j.dump() + "\n");
    const auto reloaded = load_model(path);
    if (value_bytes(reloaded.params, kAllGroups) != value_bytes(model.params, kAllGroups))
        throw std::runtime_error("checkpoint did not round-trip");
    progress("wrote " + path.string() + " after " + std::to_string(model.log.size()) + " epochs");
    const auto& last = model.log.back();
    std::printf("L_m\t%.6f\tL_s\t%.6f\n", last.main_loss, last.ssl_loss);
    return 0;
}

int cmd_eval(const ExperimentConfig& c, const std::string& hash, const std::string& checkpoint,
             const std::string& test_path)
{
    const fs::path ckpt = checkpoint.empty() ? fs::path(c.out_dir) / "model.json" : fs::path(checkpoint);
    const fs::path tpath = test_path.empty() ? fs::path(c.data_dir) / kTestFile : fs::path(test_path);
    const auto model = load_model(ckpt);
    const auto test = load_graphs(tpath, model.config.adjacency);
    if (test.front().graph.features.cols() != model.params.dims.d_in)
        throw DimensionError("test data has feature dimension " + std::to_string(test.front().graph.features.cols()) +
                             " but the checkpoint expects " + std::to_string(model.params.dims.d_in));
    TrainConfig cfg = model.config;
    cfg.alpha2 = c.train.alpha2;
    cfg.ttt_steps = c.train.ttt_steps;
    cfg.ttt_lr = c.train.ttt_lr;
    cfg.mode = c.train.mode;
    cfg.seed = c.train.seed;
    progress("evaluating " + std::to_string(test.size()) + " events, " + to_string(cfg.mode) + " mode");
    auto result = evaluate(test, model, cfg);
    result.metrics.config_fingerprint = hash;

    fs::create_directories(c.out_dir);
    const fs::path out = c.out_dir;
    std::string lines;
    for (const auto& r : result.records) {
        auto j = to_json(r);
        j["config_fingerprint"] = hash;
        lines += j.dump() + "\n";
    }
    write_text_file(out / "events.jsonl", lines);
    write_text_file(out / "metrics.json", to_json(result.metrics).dump(2) + "\n");
    ReportTable table;
    table.title = "evaluation";
    table.fingerprint = hash;
    table.rows.push_back(make_row(kVariantFull, result.metrics));
    emit_report(table, out / "metrics.csv", ReportFormat::csv);
    check_table(table, out / "metrics.csv");

    print_header(model.params.dims.num_classes);
    print_row(kVariantFull, result.metrics);
    return 0;
}

struct SeedData {
    std::vector<LabeledGraph> train;
    std::vector<LabeledGraph> test;
};

SeedData data_for_seed(const ExperimentConfig& c, bool from_files, std::uint64_t seed)
{
    if (from_files)
        return {load_graphs(fs::path(c.data_dir) / kTrainFile, c.train.adjacency),
                load_graphs(fs::path(c.data_dir) / kTestFile, c.train.adjacency)};
    BenchmarkPreset preset = c.data;
    preset.source.seed = seed;
    preset.num_val = 0;
    const auto data = generate_benchmark(preset);
    return {prepare_graphs(data.train, c.train.adjacency), prepare_graphs(data.test, c.train.adjacency)};
}

int cmd_ablate(const ExperimentConfig& c, const std::string& hash, bool from_files)
{
    ReportTable table;
    table.title = "ablation";
    table.fingerprint = hash;
    print_header(2);
    for (auto seed : c.seeds) {
        const auto data = data_for_seed(c, from_files, seed);
        TrainConfig cfg = c.train;
        cfg.seed = seed;
        progress("seed " + std::to_string(seed) + ": training");
        const auto result = run_ablation(data.train, data.test, cfg);
        for (const auto& v : result.variants) {
            auto m = v.eval.metrics;
            m.config_fingerprint = hash;
            table.rows.push_back(make_row(v.variant, m));
            print_row(v.variant + "[" + std::to_string(seed) + "]", m);
        }
    }
    write_table(table, c.out_dir, "ablation");
    return 0;
}

int cmd_sweep(const ExperimentConfig& c, const std::string& hash, bool from_files, SweepTarget which)
{
    ReportTable table;
    table.title = "sensitivity " + to_string(which);
    table.fingerprint = hash;
    table.x_label = to_string(which);
    std::string grid;
    for (double v : kSensitivityGrid)
        grid += (grid.empty() ? "" : " ") + nlohmann::json(v).dump();
    table.notes.push_back("grid " + grid);
    print_header(2);
    std::vector<ReportRow> rows;
    for (auto seed : c.seeds) {
        const auto data = data_for_seed(c, from_files, seed);
        TrainConfig cfg = c.train;
        cfg.seed = seed;
        progress("seed " + std::to_string(seed) + ": sweeping " + to_string(which));
        for (const auto& row : run_sensitivity(data.train, data.test, cfg, which)) {
            const auto name = to_string(which) + "=" + nlohmann::json(row.value).dump();
            rows.push_back(make_row(name, row.metrics));
            print_row(name + "[" + std::to_string(seed) + "]", row.metrics);
        }
    }
    // Group rows by grid value so the chart reads left to right.
    for (std::size_t k = 0; k < kSensitivityGrid.size(); ++k)
        for (std::size_t s = 0; s < c.seeds.size(); ++s)
            table.rows.push_back(rows[s * kSensitivityGrid.size() + k]);
    write_table(table, c.out_dir, "sweep_" + to_string(which));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Test-time adaptation for propagation-graph classification"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, eval_f, ablate_f, sweep_f;
    auto* gen = app.add_subcommand("gen", "generate source train/val and shifted target test datasets");
    add_common(gen, gen_f);
    auto* train = app.add_subcommand("train", "joint supervised + contrastive training; writes model.json");
    add_common(train, train_f);
    auto* eval = app.add_subcommand("eval", "adapt per test event and predict; writes metrics and per-event records");
    add_common(eval, eval_f);
    std::string checkpoint, test_path;
    eval->add_option("--checkpoint", checkpoint, "model checkpoint (default OUT/model.json)");
    eval->add_option("--test", test_path, "test dataset (default DATA/target_test.jsonl)");
    auto* ablate = app.add_subcommand("ablate", "full / no-constraint / no-adaptation comparison");
    add_common(ablate, ablate_f);
    auto* sweep = app.add_subcommand("sweep", "nine-point sensitivity sweep of alpha1 or alpha2");
    add_common(sweep, sweep_f);
    std::string which = "alpha2";
    sweep->add_option("--which", which, "alpha1 or alpha2")->check(CLI::IsMember({"alpha1", "alpha2"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto c = resolve(gen_f);
            return cmd_gen(c, echo(c), gen_f.out);
        }
        if (train->parsed()) {
            const auto c = resolve(train_f);
            return cmd_train(c, echo(c));
        }
        if (eval->parsed()) {
            const auto c = resolve(eval_f);
            return cmd_eval(c, echo(c), checkpoint, test_path);
        }
        if (ablate->parsed()) {
            const auto c = resolve(ablate_f);
            return cmd_ablate(c, echo(c), ablate_f.data.has_value());
        }
        if (sweep->parsed()) {
            const auto c = resolve(sweep_f);
            return cmd_sweep(c, echo(c), sweep_f.data.has_value(), sweep_target_from_string(which));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
