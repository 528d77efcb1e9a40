// olbench: run online-learning experiments and tabulate their reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "olbench/config.hpp"
#include "olbench/errors.hpp"
#include "olbench/ol_layer.hpp"
#include "olbench/report.hpp"
#include "olbench/text_io.hpp"

namespace fs = std::filesystem;
using namespace olbench;

namespace {

// Writes via a sibling temp file so a failure never leaves partial output.
void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << content;
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw Error("failed writing " + path.string());
        }
    }
    fs::rename(tmp, path);
}

std::string run_file_name(const ExperimentConfig& config, const StrategyConfig& run) {
    std::string stem = config.source.empty() ? "run" : config.source.stem().string();
    return stem + "_" + std::string(to_string(run.kind)) + "_a" + text::format_float(run.learning_rate) + "_k" +
           std::to_string(run.batch_size) + "_s" + std::to_string(config.seed) + ".json";
}

std::string summary_line(const RunReport& r, const fs::path& path) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s a=%-8s k=%-4zu accuracy %.4f (%zu/%zu)  ol-step %.4f ms  peak-ol %zu B",
                  r.strategy.c_str(), text::format_float(r.learning_rate).c_str(), r.batch_size, r.accuracy,
                  r.correct, r.scored, r.ol_step_time.mean_ms, r.peak_ol_bytes);
    return std::string(buf) + "  -> " + path.string();
}

struct RunArgs {
    std::vector<std::string> configs;
    ConfigOverrides overrides;
    std::size_t jobs = 1;
};

int cmd_run(const RunArgs& args) {
    // Every config is loaded and every dataset materialised before any run
    // starts, so input errors surface before anything is written.
    std::vector<ExperimentConfig> configs;
    for (const auto& path : args.configs) {
        configs.push_back(load_config(path));
        apply_overrides(configs.back(), args.overrides);
    }
    std::vector<PreparedExperiment> prepared;
    prepared.reserve(configs.size());
    std::vector<RunJob> work;
    std::vector<fs::path> targets;
    std::size_t total_runs = 0;
    std::vector<std::vector<StrategyConfig>> expanded;
    for (const auto& c : configs) {
        expanded.push_back(expand_runs(c));
        total_runs += expanded.back().size();
    }
    for (std::size_t i = 0; i < configs.size(); ++i) {
        prepared.push_back(prepare(configs[i]));
        for (const auto& run : expanded[i]) {
            work.push_back({&prepared[i], run, configs[i].options});
            targets.push_back(total_runs == 1 ? configs[i].out : configs[i].out / run_file_name(configs[i], run));
        }
    }

    const auto reports = run_jobs(work, args.jobs);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (targets[i].has_parent_path()) fs::create_directories(targets[i].parent_path());
        save_report(reports[i], targets[i]);
        std::cout << summary_line(reports[i], targets[i]) << '\n';
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& prefix) {
    std::vector<RunReport> reports;
    for (const auto& p : paths) reports.push_back(load_report(p));
    const ComparisonTable table = compare(reports);
    const std::string md = table.to_markdown();
    write_text_file(prefix + ".md", md);
    write_text_file(prefix + ".csv", table.to_csv());
    write_text_file(prefix + ".json", table.to_json().dump(2) + "\n");
    write_text_file(prefix + "_per_class.csv", per_class_csv(reports));
    std::cout << md;
    return 0;
}

int cmd_gen_synthetic(const DatasetSpec& spec, std::uint64_t seed, const fs::path& out) {
    const Dataset ds = load_dataset(spec, seed);
    std::ostringstream csv;
    write_feature_csv(csv, ds);
    write_text_file(out, csv.str());
    std::cout << ds.id << ": " << ds.size() << " samples, " << ds.shape.size() << " features -> " << out.string()
              << '\n';
    return 0;
}

int cmd_inspect(const fs::path& path) {
    const LoadedModel loaded = load_model(path);
    const FrozenModel& model = loaded.model;
    std::cout << "model " << path.string() << '\n';
    for (const auto& [key, value] : model.meta()) std::cout << "  meta " << key << " = " << value << '\n';
    std::cout << "  input " << model.input_shape().str() << '\n';
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        std::cout << "  layer " << i << " " << layer_kind(model.layers()[i]) << " -> " << model.shapes()[i + 1].str()
                  << '\n';
    }
    const HeadSeed& head = loaded.head;
    std::cout << "  features " << model.feature_len() << '\n';
    std::cout << "  head " << head.labels.size() << "x" << head.weights.cols() << " labels";
    for (const auto& l : head.labels) std::cout << ' ' << l;
    std::cout << '\n';
    const std::size_t n = head.labels.size();
    const std::size_t m = head.weights.cols();
    std::cout << "  OL memory at start (bytes):\n";
    for (auto kind : kAllStrategies) {
        std::cout << "    " << display_name(kind) << ": " << memory_bytes(kind, n, m, n) << '\n';
    }
    return 0;
}

struct ExportArgs {
    std::string model;
    std::string csv;
    std::string shape;
    std::string mnist_images;
    std::string mnist_labels;
    std::string keep;
    std::string out;
};

Shape parse_shape(const std::string& text) {
    std::vector<std::size_t> dims;
    for (auto part : text::split(text, 'x')) dims.push_back(text::parse_count(part, "shape"));
    Shape s{dims};
    if (!s.is_flat() && !s.is_image()) throw ParseError("shape must be N or HxWxC, got '" + text + "'");
    return s;
}

int cmd_export(const ExportArgs& a) {
    const LoadedModel loaded = load_model(a.model);
    DatasetSpec spec;
    if (!a.csv.empty()) {
        spec.source = DatasetSpec::Source::csv;
        spec.path = a.csv;
        spec.raw = true;
        if (!a.shape.empty()) spec.shape = parse_shape(a.shape);
    } else {
        spec.source = DatasetSpec::Source::mnist;
        spec.images = a.mnist_images;
        spec.labels = a.mnist_labels;
        if (!a.keep.empty()) {
            std::set<std::string> keep;
            for (auto l : text::split(a.keep, ',')) keep.insert(std::string(l));
            spec.keep = std::move(keep);
        }
    }
    const Dataset raw = load_dataset(spec, 0);
    const FrozenModel& model = loaded.model;
    if (model.input_shape().size() != raw.shape.size()) {
        throw ShapeError("model input " + model.input_shape().str() + " does not match dataset shape " +
                         raw.shape.str());
    }
    Dataset features{raw.id, InputKind::precomputed_features, Shape::flat(model.feature_len()), {}};
    features.samples.reserve(raw.size());
    for (const auto& s : raw.samples) features.samples.push_back({model.forward(s.input), s.label});

    std::ostringstream csv;
    write_feature_csv(csv, features);
    const std::string content = csv.str();
    std::istringstream check(content);
    if (read_feature_csv(check, a.out).samples != features.samples) {
        throw Error("exported features do not reload identically");
    }
    write_text_file(a.out, content);
    std::cout << features.size() << " samples, " << model.feature_len() << " features -> " << a.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online-learning classifier benchmark"};
    app.require_subcommand(1, 1);

    RunArgs run_args;
    std::string strategy, pseudo_test, out;
    float alpha = 0;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Run the experiments described by one or more config files");
    run->add_option("--config", run_args.configs, "Experiment config (JSON); repeatable")->required()->check(
        CLI::ExistingFile);
    auto* o_strategy = run->add_option("--strategy", strategy, "Strategy name, or 'all'");
    auto* o_alpha = run->add_option("--alpha", alpha, "Learning rate")->check(CLI::NonNegativeNumber);
    auto* o_batch = run->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
    auto* o_seed = run->add_option("--seed", seed, "Master seed");
    auto* o_pt = run->add_option("--pseudo-test", pseudo_test, "Pseudo-test start: fraction (0.8) or index (4000)");
    run->add_flag("--freeze-during-test", run_args.overrides.freeze_during_test,
                  "Stop training once scoring starts");
    run->add_option("--jobs", run_args.jobs, "Experiments to run in parallel")->check(CLI::PositiveNumber);
    auto* o_out = run->add_option("--out", out, "Report file (one run) or directory (several runs)");

    std::vector<std::string> report_paths;
    std::string prefix = "comparison";
    auto* cmp = app.add_subcommand("compare", "Tabulate run reports");
    cmp->add_option("reports", report_paths, "Report files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", prefix, "Output prefix for .md/.csv/.json/_per_class.csv");

    DatasetSpec synth;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* gen = app.add_subcommand("gen-synthetic", "Write a Gaussian-cluster feature CSV");
    gen->add_option("--classes", synth.classes)->check(CLI::Range(2, 1 << 16));
    gen->add_option("--features", synth.features)->check(CLI::PositiveNumber);
    gen->add_option("--samples-per-class", synth.samples_per_class)->check(CLI::PositiveNumber);
    gen->add_option("--spread", synth.spread)->check(CLI::PositiveNumber);
    gen->add_option("--mean-scale", synth.mean_scale)->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", synth_seed, "Master seed (same derivation as a run config)");
    gen->add_option("--out", synth_out)->required();

    std::string model_path;
    auto* inspect = app.add_subcommand("inspect-model", "Print a model file's layers and shapes");
    inspect->add_option("model", model_path)->required()->check(CLI::ExistingFile);

    ExportArgs ex;
    auto* exp = app.add_subcommand("export-features", "Run a frozen model over raw inputs and write features");
    exp->add_option("--model", ex.model)->required()->check(CLI::ExistingFile);
    auto* o_csv = exp->add_option("--csv", ex.csv, "Raw input CSV (label,f0,...)")->check(CLI::ExistingFile);
    exp->add_option("--shape", ex.shape, "Reinterpret CSV rows, e.g. 28x28x1")->needs(o_csv);
    auto* o_img = exp->add_option("--mnist-images", ex.mnist_images)->check(CLI::ExistingFile)->excludes(o_csv);
    auto* o_lbl = exp->add_option("--mnist-labels", ex.mnist_labels)->check(CLI::ExistingFile)->excludes(o_csv);
    o_img->needs(o_lbl);
    o_lbl->needs(o_img);
    exp->add_option("--keep", ex.keep, "Comma-separated MNIST labels to keep")->needs(o_img);
    exp->add_option("--out", ex.out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto& ov = run_args.overrides;
            if (*o_strategy) ov.strategy = strategy;
            if (*o_alpha) ov.learning_rate = alpha;
            if (*o_batch) ov.batch_size = batch;
            if (*o_seed) ov.seed = seed;
            if (*o_pt) ov.pseudo_test = pseudo_test;
            if (*o_out) ov.out = out;
            return cmd_run(run_args);
        }
        if (*cmp) return cmd_compare(report_paths, prefix);
        if (*gen) {
            synth.seed.reset();
            return cmd_gen_synthetic(synth, synth_seed, synth_out);
        }
        if (*inspect) return cmd_inspect(model_path);
        if (*exp) {
            if (ex.csv.empty() && ex.mnist_images.empty()) {
                throw ValidationError("export-features needs --csv or --mnist-images/--mnist-labels");
            }
            return cmd_export(ex);
        }
    } catch (const std::exception& e) {
        std::cerr << "olbench: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
