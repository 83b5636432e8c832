#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mainrisk/features.hpp"
#include "mainrisk/gbdt.hpp"
#include "mainrisk/impute.hpp"

namespace mainrisk::eval {

/// k for "top k%" with a floor of one block.
inline int top_k_count(int n_blocks, double percent) {
    if (n_blocks < 1) {
        throw std::invalid_argument("top_k_count: need at least one block");
    }
    if (!(percent > 0.0 && percent <= 100.0)) {
        throw std::invalid_argument("top_k_count: percent must be in (0, 100]");
    }
    const int k = static_cast<int>(
        std::floor(static_cast<double>(n_blocks) * percent / 100.0));
    return std::max(1, k);
}

struct RankedEntry {
    BlockId block_id = 0;
    double score = 0.0;
};

/// Blocks in descending score order; ties break toward the smaller id so
/// rankings are a deterministic function of the scores.
struct RankedList {
    std::vector<RankedEntry> entries;
};

inline RankedList make_ranked_list(std::span<const BlockId> ids,
                                   std::span<const double> scores) {
    RankedList out;
    out.entries.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        out.entries.push_back({ids[i], scores[i]});
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const RankedEntry& a, const RankedEntry& b) {
                  if (a.score != b.score) {
                      return a.score > b.score;
                  }
                  return a.block_id < b.block_id;
              });
    return out;
}

struct PrAtK {
    double precision = 0.0;
    double recall = 0.0;
    bool degenerate = false;  // no positives existed at all
};

inline PrAtK precision_recall_at_k(const RankedList& ranked,
                                   const std::map<BlockId, int>& labels,
                                   int k) {
    if (k < 1 || static_cast<size_t>(k) > ranked.entries.size()) {
        throw std::invalid_argument("precision_recall_at_k: bad k");
    }
    long total_positives = 0;
    for (const auto& e : ranked.entries) {
        const auto it = labels.find(e.block_id);
        if (it == labels.end()) {
            throw std::invalid_argument("label missing for ranked block " +
                                        std::to_string(e.block_id));
        }
        total_positives += it->second;
    }
    long hits = 0;
    for (int i = 0; i < k; ++i) {
        hits += labels.at(ranked.entries[i].block_id);
    }
    PrAtK out;
    out.precision = static_cast<double>(hits) / static_cast<double>(k);
    if (total_positives == 0) {
        out.recall = 0.0;
        out.degenerate = true;
    } else {
        out.recall =
            static_cast<double>(hits) / static_cast<double>(total_positives);
    }
    return out;
}

enum class Strategy { random, pipe_age, past_breaks, single_tree };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::pipe_age: return "pipe_age";
        case Strategy::past_breaks: return "past_breaks";
        case Strategy::single_tree: return "single_tree";
    }
    return "";
}

inline std::optional<Strategy> parse_strategy(const std::string& s) {
    if (s == "random") return Strategy::random;
    if (s == "pipe_age") return Strategy::pipe_age;
    if (s == "past_breaks") return Strategy::past_breaks;
    if (s == "single_tree") return Strategy::single_tree;
    return std::nullopt;
}

/// Expert-heuristic and reference rankers. `train` is only consulted by
/// single_tree; the others rank the test matrix directly.
inline RankedList baseline_rank(Strategy strategy, const FeatureMatrix& test,
                                std::uint64_t seed,
                                const FeatureMatrix* train = nullptr,
                                int min_samples_leaf = 5) {
    std::vector<BlockId> ids;
    ids.reserve(test.n_rows());
    for (const auto& r : test.rows) {
        ids.push_back(r.block_id);
    }
    std::vector<double> scores;
    switch (strategy) {
        case Strategy::random: {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            scores.reserve(ids.size());
            for (size_t i = 0; i < ids.size(); ++i) {
                scores.push_back(unif(rng));
            }
            break;
        }
        case Strategy::pipe_age:
            scores = test.column("pipe_age");
            break;
        case Strategy::past_breaks:
            scores = test.column("breaks_all");
            break;
        case Strategy::single_tree: {
            if (!train || !train->labels) {
                throw std::invalid_argument(
                    "single_tree baseline needs labeled training data");
            }
            if (train->columns != test.columns) {
                throw std::invalid_argument("train/test column mismatch");
            }
            std::vector<double> targets(train->labels->begin(),
                                        train->labels->end());
            std::vector<size_t> rows(train->n_rows());
            std::iota(rows.begin(), rows.end(), size_t{0});
            const auto tree = gbdt::fit_tree(train->values, targets,
                                             std::move(rows), 3,
                                             min_samples_leaf);
            scores.reserve(test.n_rows());
            for (const auto& row : test.values) {
                scores.push_back(tree.predict(row));
            }
            break;
        }
    }
    return make_ranked_list(ids, scores);
}

// --- temporal cross-validation ----------------------------------------------

struct SplitPlan {
    int horizon_years = 3;
    int lookback_years = 6;
    DateRange range;

    struct Split {
        int test_year = 0;
        std::vector<int> train_years;
    };
    std::vector<Split> splits;
};

/// All test years whose 3-year label window fits the data range and that
/// have at least one valid training reference year (one whose own label
/// window ends by the test year and whose lookback stays inside the data).
inline SplitPlan make_split_plan(const DateRange& range, int horizon_years,
                                 int lookback_years) {
    if (horizon_years < 1 || lookback_years < 0) {
        throw std::invalid_argument("bad horizon/lookback");
    }
    SplitPlan plan;
    plan.horizon_years = horizon_years;
    plan.lookback_years = lookback_years;
    plan.range = range;

    const Date upper = range.end.add_days(1);
    for (int t = range.start.year(); t <= range.end.year(); ++t) {
        const Date ref = Date::jan1(t);
        if (ref < range.start || Date::jan1(t + horizon_years) > upper) {
            continue;
        }
        SplitPlan::Split split;
        split.test_year = t;
        for (int tr = range.start.year(); tr + horizon_years <= t; ++tr) {
            if (Date::jan1(tr - lookback_years) < range.start ||
                Date::jan1(tr) < range.start) {
                continue;
            }
            split.train_years.push_back(tr);
        }
        if (!split.train_years.empty()) {
            plan.splits.push_back(std::move(split));
        }
    }
    if (plan.splits.empty()) {
        const int span = range.end.year() - range.start.year() + 1;
        throw std::invalid_argument(
            "data range spans " + std::to_string(span) +
            " years; need at least lookback + 2*horizon = " +
            std::to_string(lookback_years + 2 * horizon_years) +
            " for one temporal split");
    }
    return plan;
}

/// Keeps only the requested test years; each must be valid under the plan.
inline void restrict_test_years(SplitPlan& plan, const std::vector<int>& years) {
    if (years.empty()) {
        return;
    }
    std::vector<SplitPlan::Split> kept;
    for (const int y : years) {
        const auto it = std::find_if(
            plan.splits.begin(), plan.splits.end(),
            [&](const SplitPlan::Split& s) { return s.test_year == y; });
        if (it == plan.splits.end()) {
            throw std::invalid_argument("test year " + std::to_string(y) +
                                        " is not a valid split");
        }
        kept.push_back(*it);
    }
    std::sort(kept.begin(), kept.end(),
              [](const auto& a, const auto& b) { return a.test_year < b.test_year; });
    plan.splits = std::move(kept);
}

// --- probability calibration --------------------------------------------------

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    long count = 0;
    long positives = 0;
    double sum_predicted = 0.0;

    bool empty() const { return count == 0; }
    double mean_predicted() const {
        return sum_predicted / static_cast<double>(count);
    }
    double mean_empirical() const {
        return static_cast<double>(positives) / static_cast<double>(count);
    }
};

/// Equal-width bins over [0,1]; the last bin is closed at 1. Empty bins are
/// reported with count 0 and no means.
inline std::vector<ReliabilityBin> reliability_curve(
    std::span<const double> predictions, std::span<const int> labels,
    int bins = 10) {
    if (bins < 2) {
        throw std::invalid_argument("reliability_curve: need >= 2 bins");
    }
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("reliability_curve: size mismatch");
    }
    std::vector<ReliabilityBin> out(bins);
    for (int i = 0; i < bins; ++i) {
        out[i].lo = static_cast<double>(i) / bins;
        out[i].hi = static_cast<double>(i + 1) / bins;
    }
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double p = predictions[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("prediction outside [0,1]");
        }
        const int b = std::min(static_cast<int>(p * bins), bins - 1);
        out[b].count += 1;
        out[b].positives += labels[i];
        out[b].sum_predicted += p;
    }
    return out;
}

// --- experiment harness -------------------------------------------------------

struct ExperimentConfig {
    FeatureSpec feature_spec;
    gbdt::TrainConfig train;
    SplitPlan plan;
    double percent = 1.0;
    double buffer_halfwidth_ft = 25.0;
};

struct StrategyMetrics {
    double precision = 0.0;
    double recall = 0.0;
    bool degenerate = false;
};

struct SplitResult {
    int test_year = 0;
    int n_blocks = 0;
    int k = 0;
    long positives = 0;
    std::map<std::string, StrategyMetrics> strategies;
};

struct RankingRow {
    BlockId block_id = 0;
    std::string label;
    int road_rating = 0;
    int risk_score = 0;  // round(100 * probability)
    double probability = 0.0;
};

struct PrCurvePoint {
    int k = 0;
    double precision = 0.0;
    double recall = 0.0;
};

struct ExperimentReport {
    std::vector<SplitResult> splits;
    std::map<std::string, StrategyMetrics> aggregate;  // unweighted mean
    std::vector<std::pair<std::string, double>> importances;  // weight desc
    std::vector<ReliabilityBin> reliability;  // pooled over test predictions
    nlohmann::ordered_json config_echo;

    int final_test_year = 0;
    std::vector<RankingRow> final_rankings;
    std::vector<PrCurvePoint> pr_curve;  // final split, k = 1..n
    std::optional<gbdt::GbdtModel> final_model;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline int latest_rating_before(const BlockInfo& block, int year) {
    int rating = 0;
    for (const auto& [y, r] : block.road_ratings) {
        if (y < year) {
            rating = r;
        }
    }
    return rating;
}

}  // namespace detail

inline nlohmann::ordered_json experiment_config_echo(const ExperimentConfig& cfg) {
    nlohmann::ordered_json echo;
    echo["seed"] = cfg.train.seed;
    echo["iterations"] = cfg.train.iterations;
    echo["max_depth"] = cfg.train.max_depth;
    echo["subsample"] = cfg.train.subsample;
    echo["learning_rate"] = cfg.train.learning_rate;
    echo["min_samples_leaf"] = cfg.train.min_samples_leaf;
    echo["break_windows_years"] = cfg.feature_spec.break_windows_years;
    echo["all_time_window"] = cfg.feature_spec.all_time_window;
    echo["nearby_radius_ft"] = cfg.feature_spec.nearby_radius_ft;
    echo["lookback_years"] = cfg.feature_spec.lookback_years;
    echo["horizon_years"] = cfg.plan.horizon_years;
    echo["percent"] = cfg.percent;
    echo["buffer_halfwidth_ft"] = cfg.buffer_halfwidth_ft;
    echo["data_start"] = cfg.plan.range.start.to_string();
    echo["data_end"] = cfg.plan.range.end.to_string();
    std::vector<int> test_years;
    for (const auto& s : cfg.plan.splits) {
        test_years.push_back(s.test_year);
    }
    echo["test_years"] = test_years;
    return echo;
}

/// Full temporal cross-validation: per test year, pool training rows over
/// the valid earlier reference years, train the model plus the single-tree
/// baseline, rank the test blocks, and score model and heuristics at the
/// top k%. Reliability bins pool the model's test predictions over all
/// splits; importances come from the final split's model.
inline ExperimentReport run_experiment(const RawCity& raw, ExperimentConfig cfg,
                                       ingest::IngestReport* ingest_report = nullptr) {
    if (cfg.plan.splits.empty()) {
        throw std::invalid_argument("run_experiment: empty split plan");
    }
    ingest::IngestReport scratch;
    ingest::IngestReport& rep = ingest_report ? *ingest_report : scratch;
    const BlockTable table =
        ingest::build_block_table(raw, cfg.buffer_halfwidth_ft, rep);

    cfg.feature_spec.freeze_vocabularies(table);
    cfg.feature_spec.validate();

    ExperimentReport report;
    report.config_echo = experiment_config_echo(cfg);

    std::vector<double> pooled_predictions;
    std::vector<int> pooled_labels;
    std::optional<gbdt::GbdtModel> final_model;

    for (const auto& split : cfg.plan.splits) {
        FeatureMatrix train_matrix;
        for (const int t : split.train_years) {
            FeatureMatrix m = build_features(table, cfg.feature_spec,
                                             Date::jan1(t), cfg.plan.range);
            m.labels = label_blocks(table, Date::jan1(t), cfg.plan.horizon_years,
                                    cfg.plan.range.end);
            train_matrix.append(m);
        }
        FeatureMatrix test_matrix =
            build_features(table, cfg.feature_spec, Date::jan1(split.test_year),
                           cfg.plan.range);
        const std::vector<int> test_labels =
            label_blocks(table, Date::jan1(split.test_year),
                         cfg.plan.horizon_years, cfg.plan.range.end);

        std::map<BlockId, int> label_by_block;
        std::vector<BlockId> test_ids;
        for (size_t i = 0; i < test_matrix.n_rows(); ++i) {
            label_by_block[test_matrix.rows[i].block_id] = test_labels[i];
            test_ids.push_back(test_matrix.rows[i].block_id);
        }

        auto model = gbdt::train(train_matrix, cfg.train);
        const auto predictions = gbdt::predict(model, test_matrix);
        const auto model_ranking = make_ranked_list(test_ids, predictions);

        SplitResult result;
        result.test_year = split.test_year;
        result.n_blocks = static_cast<int>(test_matrix.n_rows());
        result.k = top_k_count(result.n_blocks, cfg.percent);
        for (const int y : test_labels) {
            result.positives += y;
        }

        auto record = [&](const std::string& name, const RankedList& ranking) {
            const PrAtK pr =
                precision_recall_at_k(ranking, label_by_block, result.k);
            result.strategies[name] = {pr.precision, pr.recall, pr.degenerate};
        };
        record("gbdt", model_ranking);
        record("single_tree",
               baseline_rank(Strategy::single_tree, test_matrix, 0,
                             &train_matrix, cfg.train.min_samples_leaf));
        record("past_breaks",
               baseline_rank(Strategy::past_breaks, test_matrix, 0));
        record("pipe_age", baseline_rank(Strategy::pipe_age, test_matrix, 0));
        record("random",
               baseline_rank(Strategy::random, test_matrix,
                             detail::mix_seed(cfg.train.seed,
                                              static_cast<std::uint64_t>(
                                                  split.test_year))));
        report.splits.push_back(std::move(result));

        pooled_predictions.insert(pooled_predictions.end(), predictions.begin(),
                                  predictions.end());
        pooled_labels.insert(pooled_labels.end(), test_labels.begin(),
                             test_labels.end());

        if (&split == &cfg.plan.splits.back()) {
            report.final_test_year = split.test_year;
            for (const auto& e : model_ranking.entries) {
                const BlockInfo* b = table.find(e.block_id);
                report.final_rankings.push_back(
                    {e.block_id, b->label,
                     detail::latest_rating_before(*b, split.test_year),
                     static_cast<int>(std::lround(100.0 * e.score)), e.score});
            }
            long hits = 0;
            const long positives = report.splits.back().positives;
            for (size_t i = 0; i < model_ranking.entries.size(); ++i) {
                hits += label_by_block.at(model_ranking.entries[i].block_id);
                report.pr_curve.push_back(
                    {static_cast<int>(i) + 1,
                     static_cast<double>(hits) / static_cast<double>(i + 1),
                     positives == 0
                         ? 0.0
                         : static_cast<double>(hits) /
                               static_cast<double>(positives)});
            }
            final_model = std::move(model);
        }
    }

    // Unweighted mean over splits.
    for (const auto& split : report.splits) {
        for (const auto& [name, m] : split.strategies) {
            auto& agg = report.aggregate[name];
            agg.precision += m.precision / static_cast<double>(report.splits.size());
            agg.recall += m.recall / static_cast<double>(report.splits.size());
            agg.degenerate = agg.degenerate || m.degenerate;
        }
    }

    if (final_model && final_model->total_splits() > 0) {
        const auto weights = gbdt::gini_importance(*final_model);
        for (size_t i = 0; i < weights.size(); ++i) {
            report.importances.emplace_back(final_model->feature_names[i],
                                            weights[i]);
        }
        std::sort(report.importances.begin(), report.importances.end(),
                  [](const auto& a, const auto& b) {
                      if (a.second != b.second) {
                          return a.second > b.second;
                      }
                      return a.first < b.first;
                  });
    }

    report.reliability = reliability_curve(pooled_predictions, pooled_labels);
    report.final_model = std::move(final_model);
    return report;
}

// --- report files ---------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
    nlohmann::ordered_json doc;
    doc["config"] = report.config_echo;
    auto splits = nlohmann::ordered_json::array();
    for (const auto& s : report.splits) {
        nlohmann::ordered_json js;
        js["test_year"] = s.test_year;
        js["n_blocks"] = s.n_blocks;
        js["k"] = s.k;
        js["positives"] = s.positives;
        for (const auto& [name, m] : s.strategies) {
            js["strategies"][name] = {{"precision_at_k", m.precision},
                                      {"recall_at_k", m.recall},
                                      {"degenerate", m.degenerate}};
        }
        splits.push_back(std::move(js));
    }
    doc["splits"] = std::move(splits);
    for (const auto& [name, m] : report.aggregate) {
        doc["aggregate"][name] = {{"precision_at_k", m.precision},
                                  {"recall_at_k", m.recall},
                                  {"degenerate", m.degenerate}};
    }
    auto importances = nlohmann::ordered_json::array();
    for (const auto& [name, w] : report.importances) {
        importances.push_back({{"feature", name}, {"weight", w}});
    }
    doc["feature_importances"] = std::move(importances);
    auto reliability = nlohmann::ordered_json::array();
    for (const auto& bin : report.reliability) {
        nlohmann::ordered_json jb;
        jb["lo"] = bin.lo;
        jb["hi"] = bin.hi;
        jb["count"] = bin.count;
        jb["positives"] = bin.positives;
        if (bin.empty()) {
            jb["mean_predicted"] = nullptr;
            jb["mean_empirical"] = nullptr;
        } else {
            jb["mean_predicted"] = bin.mean_predicted();
            jb["mean_empirical"] = bin.mean_empirical();
        }
        reliability.push_back(std::move(jb));
    }
    doc["reliability"] = std::move(reliability);
    doc["final_test_year"] = report.final_test_year;
    return doc;
}

inline void write_report_json(const ExperimentReport& report,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << report_to_json(report).dump(2) << '\n';
}

inline void write_rankings_csv(const std::vector<RankingRow>& rows,
                               const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"block_id", "label", "road_rating", "risk_score", "probability"});
    for (const auto& r : rows) {
        w.row({std::to_string(r.block_id), r.label,
               std::to_string(r.road_rating), std::to_string(r.risk_score),
               csv::fmt_double(r.probability)});
    }
}

inline void write_reliability_csv(const std::vector<ReliabilityBin>& bins,
                                  const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"bin_lo", "bin_hi", "count", "positives", "mean_predicted",
           "mean_empirical"});
    for (const auto& b : bins) {
        w.row({csv::fmt_double(b.lo), csv::fmt_double(b.hi),
               std::to_string(b.count), std::to_string(b.positives),
               b.empty() ? "" : csv::fmt_double(b.mean_predicted()),
               b.empty() ? "" : csv::fmt_double(b.mean_empirical())});
    }
}

inline void write_pr_curve_csv(const std::vector<PrCurvePoint>& points,
                               const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"k", "precision", "recall"});
    for (const auto& p : points) {
        w.row({std::to_string(p.k), csv::fmt_double(p.precision),
               csv::fmt_double(p.recall)});
    }
}

}  // namespace mainrisk::eval
