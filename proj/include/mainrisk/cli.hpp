#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mainrisk/eval.hpp"
#include "mainrisk/synth.hpp"

namespace mainrisk::cli {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Resolved run configuration. Every field has a default; list-valued keys
/// are comma-separated strings so the flat key=value config file can carry
/// them verbatim.
struct RunConfig {
    std::string data_dir = "data";
    std::string out_dir = "out";
    std::uint64_t seed = 42;

    std::string break_windows = "1,2,3,5";
    bool all_time_window = true;
    double nearby_radius_ft = 100.0;
    int lookback_years = 6;

    int iterations = 100;
    int max_depth = 3;
    double subsample = 0.5;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;

    int horizon_years = 3;
    double percent = 1.0;
    std::string data_start;  // ISO date; empty derives from work orders
    std::string data_end;
    std::string test_years;  // comma list; empty keeps every valid split

    double buffer_halfwidth_ft = 25.0;
    std::string as_of;  // rank reference date

    /// Semicolon-separated description keywords that mark a main break.
    std::string break_keywords = "Main Break/Leak";

    FeatureSpec feature_spec() const {
        FeatureSpec spec;
        spec.break_windows_years = parse_int_list(break_windows, "break_windows");
        spec.all_time_window = all_time_window;
        spec.nearby_radius_ft = nearby_radius_ft;
        spec.lookback_years = lookback_years;
        spec.validate();
        return spec;
    }

    gbdt::TrainConfig train_config() const {
        gbdt::TrainConfig cfg;
        cfg.iterations = iterations;
        cfg.max_depth = max_depth;
        cfg.subsample = subsample;
        cfg.learning_rate = learning_rate;
        cfg.min_samples_leaf = min_samples_leaf;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }

    static std::vector<int> parse_int_list(const std::string& s,
                                           const std::string& what) {
        std::vector<int> out;
        std::string item;
        std::istringstream stream(s);
        while (std::getline(stream, item, ',')) {
            if (item.empty()) {
                continue;
            }
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw UsageError("bad integer '" + item + "' in " + what);
            }
        }
        return out;
    }

    nlohmann::ordered_json echo(bool include_paths) const {
        nlohmann::ordered_json j;
        if (include_paths) {
            j["data_dir"] = data_dir;
            j["out_dir"] = out_dir;
        }
        j["seed"] = seed;
        j["break_windows"] = break_windows;
        j["all_time_window"] = all_time_window;
        j["nearby_radius_ft"] = nearby_radius_ft;
        j["lookback_years"] = lookback_years;
        j["iterations"] = iterations;
        j["max_depth"] = max_depth;
        j["subsample"] = subsample;
        j["learning_rate"] = learning_rate;
        j["min_samples_leaf"] = min_samples_leaf;
        j["horizon_years"] = horizon_years;
        j["percent"] = percent;
        j["data_start"] = data_start;
        j["data_end"] = data_end;
        j["test_years"] = test_years;
        j["buffer_halfwidth_ft"] = buffer_halfwidth_ft;
        j["as_of"] = as_of;
        j["break_keywords"] = break_keywords;
        return j;
    }
};

struct SynthCliConfig {
    std::string out_dir = "data";
    std::uint64_t seed = 42;
    int blocks = 500;
    int streets = 50;
    int years = 12;
    int start_year = 2004;
    double blank_fraction = 0.98;
    double base_rate = 0.09;

    synth::SynthParams params() const {
        if (blocks % streets != 0) {
            throw UsageError("blocks (" + std::to_string(blocks) +
                             ") must be divisible by streets (" +
                             std::to_string(streets) + ")");
        }
        synth::SynthParams p;
        p.streets = streets;
        p.blocks_per_street = blocks / streets;
        p.years = years;
        p.start_year = start_year;
        p.seed = seed;
        p.blank_fraction = blank_fraction;
        p.target_base_rate_3y = base_rate;
        return p;
    }

    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json j;
        j["out_dir"] = out_dir;
        j["seed"] = seed;
        j["blocks"] = blocks;
        j["streets"] = streets;
        j["years"] = years;
        j["start_year"] = start_year;
        j["blank_fraction"] = blank_fraction;
        j["base_rate"] = base_rate;
        return j;
    }
};

namespace detail {

inline void write_run_config(const nlohmann::ordered_json& echo,
                             const std::filesystem::path& out_dir,
                             const std::string& command) {
    nlohmann::ordered_json doc;
    doc["command"] = command;
    doc["config"] = echo;
    std::ofstream out(out_dir / "run_config.json", std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write run_config.json in " +
                                 out_dir.string());
    }
    out << doc.dump(2) << '\n';
}

struct Dataset {
    RawCity city;
    DateRange range;
    ingest::IngestReport report;
};

inline Dataset load_dataset(const RunConfig& cfg) {
    ingest::IngestOptions options;
    options.break_keywords.clear();
    std::string keyword;
    std::istringstream keywords(cfg.break_keywords);
    while (std::getline(keywords, keyword, ';')) {
        if (!keyword.empty()) {
            options.break_keywords.push_back(keyword);
        }
    }
    if (!cfg.data_start.empty() || !cfg.data_end.empty()) {
        const auto start = Date::parse(cfg.data_start);
        const auto end = Date::parse(cfg.data_end);
        if (!start || !end || *end < *start) {
            throw UsageError("data_start/data_end must both be valid dates");
        }
        options.date_range = DateRange{*start, *end};
    }
    auto loaded = ingest::load_raw_city(cfg.data_dir, options);
    Dataset ds;
    ds.city = std::move(loaded.city);
    ds.report = std::move(loaded.report);
    ds.range = options.date_range ? *options.date_range
                                  : ingest::derive_data_range(ds.city);
    return ds;
}

inline eval::ExperimentConfig make_experiment_config(const RunConfig& cfg,
                                                     const DateRange& range) {
    eval::ExperimentConfig out;
    out.feature_spec = cfg.feature_spec();
    out.train = cfg.train_config();
    out.percent = cfg.percent;
    out.buffer_halfwidth_ft = cfg.buffer_halfwidth_ft;
    out.plan = eval::make_split_plan(range, cfg.horizon_years,
                                     cfg.lookback_years);
    const auto years = RunConfig::parse_int_list(cfg.test_years, "test_years");
    eval::restrict_test_years(out.plan, years);
    return out;
}

}  // namespace detail

inline void cmd_synth(const SynthCliConfig& cfg) {
    const auto params = cfg.params();
    const auto city = synth::make_city(params);
    std::filesystem::create_directories(cfg.out_dir);
    synth::write_city(city, cfg.out_dir);
    detail::write_run_config(cfg.echo(), cfg.out_dir, "synth");
    std::cout << "wrote " << city.raw.blocks.size() << " blocks, "
              << city.raw.mains.size() << " mains, "
              << city.raw.work_orders.size() << " work orders to "
              << cfg.out_dir << "\n";
}

inline void cmd_ingest(const RunConfig& cfg) {
    auto ds = detail::load_dataset(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    const BlockTable table = ingest::build_block_table(
        ds.city, cfg.buffer_halfwidth_ft, ds.report);
    ingest::write_block_table_csv(table,
                                  std::filesystem::path(cfg.out_dir) /
                                      "block_table.csv");
    ingest::write_rejects_csv(ds.report, std::filesystem::path(cfg.out_dir) /
                                             "rejects.csv");
    detail::write_run_config(cfg.echo(true), cfg.out_dir, "ingest");
    long accepted = 0, rejected = 0;
    for (const auto& [file, counts] : ds.report.counts) {
        std::cout << file << ": " << counts.accepted << " accepted, "
                  << counts.rejected << " rejected\n";
        accepted += counts.accepted;
        rejected += counts.rejected;
    }
    std::cout << "block table: " << table.blocks.size() << " blocks ("
              << accepted << " rows accepted, " << rejected << " rejected)\n";
}

inline eval::ExperimentReport cmd_evaluate(const RunConfig& cfg) {
    auto ds = detail::load_dataset(cfg);
    auto experiment = detail::make_experiment_config(cfg, ds.range);
    auto report = eval::run_experiment(ds.city, experiment, &ds.report);

    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    eval::write_report_json(report, out / "report.json");
    eval::write_rankings_csv(report.final_rankings, out / "rankings.csv");
    eval::write_reliability_csv(report.reliability, out / "reliability.csv");
    eval::write_pr_curve_csv(report.pr_curve, out / "pr_curve.csv");
    ingest::write_rejects_csv(ds.report, out / "rejects.csv");
    if (report.final_model) {
        gbdt::save_model(*report.final_model, (out / "model.json").string());
    }
    detail::write_run_config(cfg.echo(true), out, "evaluate");

    // Model-vs-baselines comparison, ascending like the paper's table.
    std::vector<std::pair<std::string, eval::StrategyMetrics>> rows(
        report.aggregate.begin(), report.aggregate.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.second.precision < b.second.precision;
    });
    std::printf("%-24s %-18s %-18s\n", "Heuristic/Model",
                "Precision at k%", "Recall at k%");
    for (const auto& [name, m] : rows) {
        std::printf("%-24s %-18.4f %-18.4f\n", name.c_str(), m.precision,
                    m.recall);
    }
    return report;
}

inline void cmd_calibrate(const RunConfig& cfg) {
    auto ds = detail::load_dataset(cfg);
    auto experiment = detail::make_experiment_config(cfg, ds.range);
    const auto report = eval::run_experiment(ds.city, experiment, &ds.report);
    std::filesystem::create_directories(cfg.out_dir);
    eval::write_reliability_csv(report.reliability,
                                std::filesystem::path(cfg.out_dir) /
                                    "reliability.csv");
    detail::write_run_config(cfg.echo(true), cfg.out_dir, "calibrate");
    for (const auto& bin : report.reliability) {
        if (bin.empty()) {
            std::printf("[%.1f, %.1f%s  empty\n", bin.lo, bin.hi,
                        bin.hi == 1.0 ? "]" : ")");
        } else {
            std::printf("[%.1f, %.1f%s  n=%-6ld predicted %.4f  empirical %.4f\n",
                        bin.lo, bin.hi, bin.hi == 1.0 ? "]" : ")", bin.count,
                        bin.mean_predicted(), bin.mean_empirical());
        }
    }
}

/// Deployment scoring: trains on every reference year whose label window
/// closes by `as_of`, then ranks all modeled blocks as of that date.
inline void cmd_rank(const RunConfig& cfg) {
    if (cfg.as_of.empty()) {
        throw UsageError("rank requires --as_of YYYY-MM-DD");
    }
    const auto as_of = Date::parse(cfg.as_of);
    if (!as_of) {
        throw UsageError("bad --as_of date '" + cfg.as_of + "'");
    }
    auto ds = detail::load_dataset(cfg);
    FeatureSpec spec = cfg.feature_spec();

    const BlockTable table =
        ingest::build_block_table(ds.city, cfg.buffer_halfwidth_ft, ds.report);
    spec.freeze_vocabularies(table);

    std::vector<int> train_years;
    for (int t = ds.range.start.year() + cfg.lookback_years;
         Date::jan1(t + cfg.horizon_years) <= *as_of; ++t) {
        train_years.push_back(t);
    }
    if (train_years.empty()) {
        throw std::runtime_error(
            "as_of " + as_of->to_string() +
            " is before the minimum trainable date (need lookback + horizon "
            "years of history)");
    }

    // Scoring may happen one day past the last event; widen coverage by a day.
    const DateRange coverage{ds.range.start, ds.range.end.add_days(1)};
    FeatureMatrix train_matrix;
    for (const int t : train_years) {
        FeatureMatrix m = build_features(table, spec, Date::jan1(t), coverage);
        m.labels = label_blocks(table, Date::jan1(t), cfg.horizon_years,
                                ds.range.end);
        train_matrix.append(m);
    }
    const auto model = gbdt::train(train_matrix, cfg.train_config());
    const FeatureMatrix scoring = build_features(table, spec, *as_of, coverage);
    const auto predictions = gbdt::predict(model, scoring);

    std::vector<BlockId> ids;
    for (const auto& r : scoring.rows) {
        ids.push_back(r.block_id);
    }
    const auto ranking = eval::make_ranked_list(ids, predictions);
    std::vector<eval::RankingRow> rows;
    rows.reserve(ranking.entries.size());
    for (const auto& e : ranking.entries) {
        const BlockInfo* b = table.find(e.block_id);
        rows.push_back({e.block_id, b->label,
                        eval::detail::latest_rating_before(*b, as_of->year()),
                        static_cast<int>(std::lround(100.0 * e.score)),
                        e.score});
    }
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path out(cfg.out_dir);
    eval::write_rankings_csv(rows, out / "rankings.csv");
    gbdt::save_model(model, (out / "model.json").string());
    detail::write_run_config(cfg.echo(true), out, "rank");
    std::cout << "ranked " << rows.size() << " blocks as of "
              << as_of->to_string() << " (trained on "
              << train_matrix.n_rows() << " rows over "
              << train_years.size() << " reference years)\n";
}

/// Flat key=value config file. Lines starting with '#' and blank lines are
/// skipped. Returns pairs in file order.
inline std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file: " + path);
    }
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) +
                             " is not key=value: " + t);
        }
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

}  // namespace mainrisk::cli
