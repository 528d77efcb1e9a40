#include "olbench/config.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <thread>

#include "olbench/errors.hpp"
#include "olbench/text_io.hpp"

namespace olbench {

using nlohmann::json;

namespace {

// Sub-seed tags derived from the master seed.
constexpr std::uint64_t kDatasetSeedTag = 1;
constexpr std::uint64_t kWarmupDataTag = 2;
constexpr std::uint64_t kWarmupStreamTag = 3;
constexpr std::uint64_t kClassMeansTag = 4;

template <typename T>
std::vector<T> one_or_many(const json& j, const char* key) {
    const json& v = j.at(key);
    if (v.is_array()) {
        if (v.empty()) throw ParseError(std::string("config: '") + key + "' must not be an empty list");
        return v.get<std::vector<T>>();
    }
    return {v.get<T>()};
}

std::vector<StrategyKind> parse_strategies(const std::vector<std::string>& names) {
    std::vector<StrategyKind> out;
    for (const auto& name : names) {
        if (name == "all") {
            out.insert(out.end(), kAllStrategies.begin(), kAllStrategies.end());
            continue;
        }
        const auto kind = parse_strategy(name);
        if (!kind) throw ParseError("config: unknown strategy '" + name + "'");
        out.push_back(*kind);
    }
    return out;
}

TestBoundary boundary_from_json(const json& v) {
    if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw ParseError("config: pseudo_test index must be >= 0");
        return TestBoundary::at_index(v.get<std::size_t>());
    }
    if (v.is_number_float()) return TestBoundary::at_fraction(v.get<double>());
    if (v.is_string()) return parse_boundary(v.get<std::string>());
    throw ParseError("config: pseudo_test must be a fraction in (0, 1) or a non-negative sample index");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw ParseError("config: unknown key '" + key + "' in " + where);
        }
    }
}

DatasetSpec parse_dataset(const json& j, const std::filesystem::path& base) {
    reject_unknown(j,
                   {"kind", "id", "classes", "features", "samples_per_class", "spread", "mean_scale", "seed", "path",
                    "raw", "shape", "images", "labels", "keep", "per_class"},
                   "dataset");
    DatasetSpec d;
    const auto kind = j.at("kind").get<std::string>();
    if (j.contains("id")) d.id = j.at("id").get<std::string>();
    if (kind == "synthetic") {
        d.source = DatasetSpec::Source::synthetic;
        d.classes = j.value("classes", d.classes);
        d.features = j.value("features", d.features);
        d.samples_per_class = j.value("samples_per_class", d.samples_per_class);
        d.spread = j.value("spread", d.spread);
        d.mean_scale = j.value("mean_scale", d.mean_scale);
        if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
    } else if (kind == "csv") {
        d.source = DatasetSpec::Source::csv;
        d.path = resolve_data_path(j.at("path").get<std::string>(), base);
        d.raw = j.value("raw", false);
        if (j.contains("shape")) d.shape = Shape{j.at("shape").get<std::vector<std::size_t>>()};
    } else if (kind == "mnist") {
        d.source = DatasetSpec::Source::mnist;
        d.images = resolve_data_path(j.at("images").get<std::string>(), base);
        d.labels = resolve_data_path(j.at("labels").get<std::string>(), base);
        if (j.contains("keep")) {
            std::set<std::string> keep;
            for (const auto& v : j.at("keep")) keep.insert(v.is_string() ? v.get<std::string>() : std::to_string(v.get<int>()));
            d.keep = std::move(keep);
        }
        if (j.contains("per_class")) d.per_class = j.at("per_class").get<std::size_t>();
    } else {
        throw ParseError("config: dataset kind must be 'synthetic', 'csv' or 'mnist', got '" + kind + "'");
    }
    return d;
}

WarmupSpec parse_warmup(const json& j, const std::filesystem::path& base) {
    reject_unknown(j, {"classes", "samples_per_class", "path", "strategy", "alpha", "batch", "epochs"}, "warmup");
    WarmupSpec w;
    w.classes = j.value("classes", w.classes);
    w.samples_per_class = j.value("samples_per_class", w.samples_per_class);
    if (j.contains("path")) w.path = resolve_data_path(j.at("path").get<std::string>(), base);
    if (j.contains("strategy")) {
        const auto kind = parse_strategy(j.at("strategy").get<std::string>());
        if (!kind) throw ParseError("config: unknown warmup strategy");
        w.strategy.kind = *kind;
    }
    w.strategy.learning_rate = j.value("alpha", w.strategy.learning_rate);
    w.strategy.batch_size = j.value("batch", w.strategy.batch_size);
    w.epochs = j.value("epochs", w.epochs);
    return w;
}

SyntheticSpec synthetic_spec(const DatasetSpec& d, std::uint64_t master_seed) {
    const std::uint64_t data_seed = d.seed.value_or(derive_seed(master_seed, kDatasetSeedTag));
    SyntheticSpec spec;
    spec.labels = default_class_labels(d.classes);
    spec.feature_len = d.features;
    spec.means = random_class_means(d.classes, d.features, d.mean_scale, derive_seed(data_seed, kClassMeansTag));
    spec.spread = d.spread;
    spec.samples_per_class = d.samples_per_class;
    spec.seed = data_seed;
    return spec;
}

}  // namespace

std::filesystem::path resolve_data_path(const std::filesystem::path& path, const std::filesystem::path& base_dir) {
    if (path.is_absolute()) return path;
    const auto local = base_dir / path;
    if (std::filesystem::exists(local)) return local;
    if (const char* root = std::getenv("OLBENCH_DATA_DIR"); root && *root) {
        const auto fallback = std::filesystem::path(root) / path;
        if (std::filesystem::exists(fallback)) return fallback;
    }
    return local;
}

TestBoundary parse_boundary(const std::string& text) {
    if (text.find_first_of(".eE") != std::string::npos) {
        double f = 0.0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), f);
        if (ec != std::errc{} || end != text.data() + text.size()) {
            throw ParseError("pseudo-test fraction: cannot parse '" + text + "'");
        }
        return TestBoundary::at_fraction(f);
    }
    return TestBoundary::at_index(text::parse_count(text, "pseudo-test index"));
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    try {
        reject_unknown(j,
                       {"dataset", "model", "head", "warmup", "strategy", "alpha", "batch", "seed", "pseudo_test",
                        "freeze_during_test", "max_classes", "out"},
                       "config");
        c.dataset = parse_dataset(j.at("dataset"), base_dir);
        if (j.contains("model")) c.model = resolve_data_path(j.at("model").get<std::string>(), base_dir);
        if (j.contains("head")) c.head = resolve_data_path(j.at("head").get<std::string>(), base_dir);
        if (j.contains("warmup")) c.warmup = parse_warmup(j.at("warmup"), base_dir);
        if (j.contains("strategy")) c.strategies = parse_strategies(one_or_many<std::string>(j, "strategy"));
        if (j.contains("alpha")) c.learning_rates = one_or_many<float>(j, "alpha");
        if (j.contains("batch")) c.batch_sizes = one_or_many<std::size_t>(j, "batch");
        c.seed = j.value("seed", c.seed);
        if (j.contains("pseudo_test")) c.boundary = boundary_from_json(j.at("pseudo_test"));
        c.options.freeze_during_test = j.value("freeze_during_test", false);
        c.options.max_classes = j.value("max_classes", kDefaultMaxClasses);
        if (j.contains("out")) c.out = base_dir / j.at("out").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    ExperimentConfig c = parse_config(j, base);
    c.source = path;
    return c;
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o) {
    if (o.strategy) config.strategies = parse_strategies({*o.strategy});
    if (o.learning_rate) config.learning_rates = {*o.learning_rate};
    if (o.batch_size) config.batch_sizes = {*o.batch_size};
    if (o.seed) config.seed = *o.seed;
    if (o.pseudo_test) config.boundary = parse_boundary(*o.pseudo_test);
    if (o.freeze_during_test) config.options.freeze_during_test = true;
    if (o.out) config.out = *o.out;
}

std::vector<StrategyConfig> expand_runs(const ExperimentConfig& config) {
    std::vector<StrategyConfig> runs;
    for (auto kind : config.strategies) {
        for (float alpha : config.learning_rates) {
            for (auto k : config.batch_sizes) {
                StrategyConfig run{kind, alpha, k};
                run.validate();
                runs.push_back(run);
            }
        }
    }
    return runs;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t master_seed) {
    Dataset ds;
    switch (spec.source) {
        case DatasetSpec::Source::synthetic:
            ds = gen_synthetic(synthetic_spec(spec, master_seed));
            break;
        case DatasetSpec::Source::csv:
            ds = load_feature_csv(spec.path, spec.raw ? InputKind::flat_vector : InputKind::precomputed_features);
            if (spec.shape) {
                if (spec.shape->size() != ds.shape.size()) {
                    throw ValidationError("dataset shape " + spec.shape->str() + " does not hold " +
                                          std::to_string(ds.shape.size()) + " values per row");
                }
                ds.shape = *spec.shape;
                if (ds.shape.is_image()) ds.kind = InputKind::image_plane;
            }
            break;
        case DatasetSpec::Source::mnist: {
            ds = load_mnist_idx(spec.images, spec.labels, spec.keep);
            if (spec.per_class) {
                std::map<std::string, std::size_t> taken;
                std::erase_if(ds.samples, [&](const Sample& s) { return taken[s.label]++ >= *spec.per_class; });
            }
            break;
        }
    }
    if (spec.id) ds.id = *spec.id;
    ds.validate();
    return ds;
}

PreparedExperiment prepare(const ExperimentConfig& config) {
    std::optional<FrozenModel> model;
    std::optional<HeadSeed> head;
    if (config.model) {
        auto loaded = load_model(*config.model);
        model = std::move(loaded.model);
        head = std::move(loaded.head);
    }
    Dataset dataset = load_dataset(config.dataset, config.seed);

    if (config.warmup) {
        const WarmupSpec& w = *config.warmup;
        Dataset warm;
        if (config.dataset.source == DatasetSpec::Source::synthetic) {
            SyntheticSpec spec = synthetic_spec(config.dataset, config.seed);
            if (w.classes < 2 || w.classes > spec.labels.size()) {
                throw ValidationError("warmup classes must be between 2 and the dataset's class count");
            }
            spec.labels.resize(w.classes);
            spec.means.resize(w.classes);
            spec.samples_per_class = w.samples_per_class;
            spec.seed = derive_seed(config.seed, kWarmupDataTag);
            warm = gen_synthetic(spec);
        } else {
            if (w.path.empty()) throw ValidationError("warmup needs a feature CSV path for non-synthetic datasets");
            warm = load_feature_csv(w.path);
        }
        head = fit_head(warm, w.strategy, derive_seed(config.seed, kWarmupStreamTag), w.epochs);
    } else if (config.head) {
        head = load_model(*config.head).head;
    }
    if (!head) throw ValidationError("config provides no head: set 'model', 'head' or 'warmup'");

    // With precomputed features the model file only supplies the head.
    if (dataset.kind == InputKind::precomputed_features) model.reset();

    StreamPlan plan = build_stream(dataset, config.seed, config.boundary);
    return PreparedExperiment{std::move(dataset), std::move(model), std::move(*head), std::move(plan)};
}

std::vector<RunReport> run_jobs(std::span<const RunJob> work, std::size_t jobs) {
    std::vector<std::optional<RunReport>> results(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            const RunJob& job = work[i];
            try {
                const PreparedExperiment& p = *job.prepared;
                results[i] = run_experiment(p.model ? &*p.model : nullptr, p.head, p.dataset, p.plan, job.config,
                                            job.options);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(work.size(), 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<RunReport> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

std::vector<RunReport> run_all(const PreparedExperiment& prepared, std::span<const StrategyConfig> runs,
                               const RunOptions& options, std::size_t jobs) {
    std::vector<RunJob> work;
    for (const auto& run : runs) work.push_back({&prepared, run, options});
    return run_jobs(work, jobs);
}

}  // namespace olbench
