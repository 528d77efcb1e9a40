#include "olbench/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "olbench/errors.hpp"

namespace olbench {

using nlohmann::json;

namespace {

json timing_json(const TimingStats& t) {
    return {{"count", t.count}, {"mean_ms", t.mean_ms}, {"min_ms", t.min_ms}, {"max_ms", t.max_ms}};
}

TimingStats timing_from(const json& j) {
    TimingStats t;
    t.count = j.at("count").get<std::size_t>();
    t.mean_ms = j.at("mean_ms").get<double>();
    t.min_ms = j.at("min_ms").get<double>();
    t.max_ms = j.at("max_ms").get<double>();
    return t;
}

// Order reports by strategy (stable), returning indices.
std::vector<std::size_t> column_order(std::span<const RunReport> reports) {
    std::vector<std::size_t> idx(reports.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rank = [&](std::size_t i) {
        const auto kind = parse_strategy(reports[i].strategy);
        return kind ? static_cast<int>(*kind) : static_cast<int>(kAllStrategies.size());
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });
    return idx;
}

std::string column_title(const RunReport& r, bool disambiguate) {
    const auto kind = parse_strategy(r.strategy);
    std::string title = kind ? std::string(display_name(*kind)) : r.strategy;
    if (disambiguate) {
        std::ostringstream s;
        s << title << " (a=" << r.learning_rate << " k=" << r.batch_size << " seed=" << r.seed << ")";
        title = s.str();
    }
    return title;
}

std::vector<std::string> column_titles(std::span<const RunReport> reports, std::span<const std::size_t> order) {
    std::map<std::string, int> uses;
    for (auto i : order) ++uses[reports[i].strategy];
    std::vector<std::string> titles;
    for (auto i : order) titles.push_back(column_title(reports[i], uses[reports[i].strategy] > 1));
    return titles;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

json report_to_json(const RunReport& r, bool include_timing) {
    json per_class = json::array();
    for (const auto& c : r.per_class) {
        per_class.push_back({{"label", c.label}, {"correct", c.correct}, {"total", c.total}, {"accuracy", c.accuracy()}});
    }
    json j = {
        {"schema", r.schema},
        {"run",
         {{"strategy", r.strategy},
          {"learning_rate", r.learning_rate},
          {"batch_size", r.batch_size},
          {"seed", r.seed},
          {"dataset_id", r.dataset_id},
          {"dataset_size", r.dataset_size},
          {"pseudo_test_start", r.pseudo_test_start},
          {"freeze_during_test", r.freeze_during_test},
          {"initial_classes", r.initial_classes},
          {"class_arrival", r.class_arrival}}},
        {"scores",
         {{"scored", r.scored},
          {"correct", r.correct},
          {"accuracy", r.accuracy},
          {"per_class", per_class},
          {"confusion_labels", r.confusion_labels},
          {"confusion", r.confusion}}},
        {"memory", {{"peak_ol_bytes", r.peak_ol_bytes}, {"peak_classes", r.peak_classes}}},
    };
    if (include_timing) {
        j["timing"] = {{"frozen_forward", timing_json(r.forward_time)}, {"ol_step", timing_json(r.ol_step_time)}};
    }
    return j;
}

RunReport report_from_json(const json& j) {
    RunReport r;
    try {
        r.schema = j.at("schema").get<std::string>();
        const json& run = j.at("run");
        r.strategy = run.at("strategy").get<std::string>();
        r.learning_rate = run.at("learning_rate").get<float>();
        r.batch_size = run.at("batch_size").get<std::size_t>();
        r.seed = run.at("seed").get<std::uint64_t>();
        r.dataset_id = run.at("dataset_id").get<std::string>();
        r.dataset_size = run.at("dataset_size").get<std::size_t>();
        r.pseudo_test_start = run.at("pseudo_test_start").get<std::size_t>();
        r.freeze_during_test = run.at("freeze_during_test").get<bool>();
        r.initial_classes = run.at("initial_classes").get<std::size_t>();
        r.class_arrival = run.at("class_arrival").get<std::vector<std::string>>();
        const json& scores = j.at("scores");
        r.scored = scores.at("scored").get<std::size_t>();
        r.correct = scores.at("correct").get<std::size_t>();
        r.accuracy = scores.at("accuracy").get<double>();
        for (const auto& c : scores.at("per_class")) {
            r.per_class.push_back(
                {c.at("label").get<std::string>(), c.at("correct").get<std::size_t>(), c.at("total").get<std::size_t>()});
        }
        r.confusion_labels = scores.at("confusion_labels").get<std::vector<std::string>>();
        r.confusion = scores.at("confusion").get<std::vector<std::vector<std::size_t>>>();
        r.peak_ol_bytes = j.at("memory").at("peak_ol_bytes").get<std::size_t>();
        r.peak_classes = j.at("memory").at("peak_classes").get<std::size_t>();
        if (j.contains("timing")) {
            r.forward_time = timing_from(j.at("timing").at("frozen_forward"));
            r.ol_step_time = timing_from(j.at("timing").at("ol_step"));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    r.validate();
    return r;
}

void save_report(const RunReport& report, const std::filesystem::path& path) {
    // Written beside the target and renamed only after it reloads cleanly, so a
    // failed run never leaves a partial report behind.
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write report " + path.string());
        out << report_to_json(report).dump(2) << '\n';
        if (!out) throw Error("failed writing report " + path.string());
    }
    try {
        load_report(tmp);
    } catch (...) {
        std::filesystem::remove(tmp);
        throw;
    }
    std::filesystem::rename(tmp, path);
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open report " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

ComparisonTable compare(std::span<const RunReport> reports) {
    if (reports.empty()) throw ValidationError("compare needs at least one report");
    for (const auto& r : reports) {
        if (r.schema != kReportSchema) {
            throw ValidationError("report schema '" + r.schema + "' is not supported (expected " + kReportSchema + ")");
        }
        if (r.dataset_id != reports.front().dataset_id) {
            throw ValidationError("refusing to compare runs on different datasets: '" + reports.front().dataset_id +
                                  "' vs '" + r.dataset_id + "'");
        }
    }
    const auto order = column_order(reports);
    ComparisonTable table;
    table.dataset_id = reports.front().dataset_id;
    table.columns = column_titles(reports, order);
    table.rows = {"Accuracy (%)", "Training step time (ms)", "Max allocated OL memory (kB)"};
    table.values.assign(3, {});
    for (auto i : order) {
        const auto& r = reports[i];
        table.values[0].push_back(100.0 * r.accuracy);
        table.values[1].push_back(r.ol_step_time.mean_ms);
        table.values[2].push_back(static_cast<double>(r.peak_ol_bytes) / 1000.0);
    }
    return table;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream s;
    s << "metric";
    for (const auto& c : columns) s << ',' << csv_cell(c);
    s << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s << csv_cell(rows[r]);
        for (double v : values[r]) s << ',' << fixed(v, 4);
        s << '\n';
    }
    return s.str();
}

std::string ComparisonTable::to_markdown() const {
    static constexpr int kDigits[] = {2, 4, 2};
    std::ostringstream s;
    s << "| |";
    for (const auto& c : columns) s << ' ' << c << " |";
    s << "\n|---|";
    for (std::size_t c = 0; c < columns.size(); ++c) s << "---:|";
    s << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s << "| **" << rows[r] << "** |";
        for (double v : values[r]) s << ' ' << fixed(v, r < 3 ? kDigits[r] : 4) << " |";
        s << '\n';
    }
    return s.str();
}

json ComparisonTable::to_json() const {
    json j = {{"dataset_id", dataset_id}, {"columns", columns}, {"rows", json::array()}};
    for (std::size_t r = 0; r < rows.size(); ++r) j["rows"].push_back({{"metric", rows[r]}, {"values", values[r]}});
    return j;
}

std::string per_class_csv(std::span<const RunReport> reports) {
    const auto order = column_order(reports);
    const auto titles = column_titles(reports, order);
    std::vector<std::string> classes;
    for (auto i : order) {
        for (const auto& c : reports[i].per_class) {
            if (std::find(classes.begin(), classes.end(), c.label) == classes.end()) classes.push_back(c.label);
        }
    }
    std::ostringstream s;
    s << "class";
    for (const auto& t : titles) s << ',' << csv_cell(t);
    s << '\n';
    for (const auto& label : classes) {
        s << csv_cell(label);
        for (auto i : order) {
            const auto& pc = reports[i].per_class;
            const auto it = std::find_if(pc.begin(), pc.end(), [&](const ClassScore& c) { return c.label == label; });
            s << ',';
            if (it != pc.end()) s << fixed(100.0 * it->accuracy(), 2);
        }
        s << '\n';
    }
    return s.str();
}

}  // namespace olbench
