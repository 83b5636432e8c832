// mainrisk command-line entry point: synth, ingest, evaluate, rank,
// calibrate. Any config-file key equals its flag name; flags win.

#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mainrisk/cli.hpp"

namespace {

using mainrisk::cli::RunConfig;
using mainrisk::cli::SynthCliConfig;
using mainrisk::cli::UsageError;

/// Registers an option and remembers how to set it from a config-file
/// string, so file values can be applied to options the command line left
/// untouched.
class Binder {
public:
    explicit Binder(CLI::App* sub) : sub_(sub) {}

    template <typename T>
    void add(const std::string& key, T& target, const std::string& help,
             const std::string& extra_names = "") {
        const std::string names =
            "--" + key + (extra_names.empty() ? "" : "," + extra_names);
        sub_->add_option(names, target, help);
        setters_[key] = [&target](const std::string& value) {
            set_from_string(target, value);
        };
    }

    void add_flag(const std::string& key, bool& target,
                  const std::string& help) {
        sub_->add_option("--" + key, target, help);
        setters_[key] = [&target](const std::string& value) {
            set_from_string(target, value);
        };
    }

    /// Applies config-file pairs for keys the command line did not set.
    void apply_file(const std::vector<std::pair<std::string, std::string>>& kv) {
        for (const auto& [key, value] : kv) {
            const auto it = setters_.find(key);
            if (it == setters_.end()) {
                throw UsageError("unknown config key '" + key + "' for " +
                                 sub_->get_name());
            }
            const CLI::Option* opt = sub_->get_option("--" + key);
            if (opt->count() > 0) {
                continue;  // flags win
            }
            it->second(value);
        }
    }

private:
    static void set_from_string(std::string& t, const std::string& v) { t = v; }
    static void set_from_string(int& t, const std::string& v) { t = std::stoi(v); }
    static void set_from_string(double& t, const std::string& v) {
        t = std::stod(v);
    }
    static void set_from_string(std::uint64_t& t, const std::string& v) {
        t = std::stoull(v);
    }
    static void set_from_string(bool& t, const std::string& v) {
        if (v == "true" || v == "1") {
            t = true;
        } else if (v == "false" || v == "0") {
            t = false;
        } else {
            throw UsageError("bad boolean value '" + v + "'");
        }
    }

    CLI::App* sub_;
    std::map<std::string, std::function<void(const std::string&)>> setters_;
};

void bind_common(Binder& b, RunConfig& cfg) {
    b.add("data_dir", cfg.data_dir, "dataset directory", "--data");
    b.add("out_dir", cfg.out_dir, "output directory", "--out");
    b.add("seed", cfg.seed, "master random seed");
    b.add("break_windows", cfg.break_windows,
          "comma-separated break-count windows in years");
    b.add_flag("all_time_window", cfg.all_time_window,
               "include the all-time break count");
    b.add("nearby_radius_ft", cfg.nearby_radius_ft,
          "radius for nearby-break counts");
    b.add("lookback_years", cfg.lookback_years, "feature history span");
    b.add("iterations", cfg.iterations, "boosting iterations");
    b.add("max_depth", cfg.max_depth, "tree depth limit");
    b.add("subsample", cfg.subsample, "per-iteration row subsample fraction");
    b.add("learning_rate", cfg.learning_rate, "shrinkage weight per tree");
    b.add("min_samples_leaf", cfg.min_samples_leaf, "minimum rows per leaf");
    b.add("horizon_years", cfg.horizon_years, "label window in years");
    b.add("percent", cfg.percent, "top-k percentage for ranking metrics");
    b.add("data_start", cfg.data_start, "data coverage start (YYYY-MM-DD)");
    b.add("data_end", cfg.data_end, "data coverage end (YYYY-MM-DD)");
    b.add("test_years", cfg.test_years,
          "comma-separated test years (default: all valid)");
    b.add("buffer_halfwidth_ft", cfg.buffer_halfwidth_ft,
          "street buffer half-width for main assignment");
    b.add("break_keywords", cfg.break_keywords,
          "semicolon-separated main-break description keywords");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"water-main break risk ranking for city blocks"};
    app.require_subcommand(1);

    RunConfig cfg;
    SynthCliConfig synth_cfg;
    std::string config_path;

    auto* synth = app.add_subcommand("synth", "generate a synthetic city dataset");
    Binder synth_binder(synth);
    synth->add_option("--config", config_path, "flat key=value config file");
    synth_binder.add("out_dir", synth_cfg.out_dir, "output directory", "--out");
    synth_binder.add("seed", synth_cfg.seed, "master random seed");
    synth_binder.add("blocks", synth_cfg.blocks, "total city blocks");
    synth->get_option("--blocks")->check(CLI::PositiveNumber);
    synth_binder.add("streets", synth_cfg.streets, "number of streets");
    synth->get_option("--streets")->check(CLI::PositiveNumber);
    synth_binder.add("years", synth_cfg.years, "calendar years simulated");
    synth->get_option("--years")->check(CLI::PositiveNumber);
    synth_binder.add("start_year", synth_cfg.start_year, "first simulated year");
    synth_binder.add("blank_fraction", synth_cfg.blank_fraction,
                     "fraction of mains with blanked attributes");
    synth_binder.add("base_rate", synth_cfg.base_rate,
                     "target 3-year block break rate");

    auto* ingest = app.add_subcommand("ingest",
                                      "validate a dataset and emit the block table");
    auto* evaluate = app.add_subcommand(
        "evaluate", "temporal cross-validation against the baselines");
    auto* rank = app.add_subcommand("rank", "score every block as of a date");
    auto* calibrate =
        app.add_subcommand("calibrate", "reliability bins only");

    std::map<CLI::App*, Binder> binders;
    for (CLI::App* sub : {ingest, evaluate, rank, calibrate}) {
        auto [it, inserted] = binders.emplace(sub, Binder(sub));
        sub->add_option("--config", config_path, "flat key=value config file");
        bind_common(it->second, cfg);
    }
    binders.at(rank).add("as_of", cfg.as_of, "reference date (YYYY-MM-DD)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        if (!config_path.empty()) {
            const auto kv = mainrisk::cli::read_config_file(config_path);
            if (active == synth) {
                synth_binder.apply_file(kv);
            } else {
                binders.at(active).apply_file(kv);
            }
        }
        if (active == synth) {
            mainrisk::cli::cmd_synth(synth_cfg);
        } else if (active == ingest) {
            mainrisk::cli::cmd_ingest(cfg);
        } else if (active == evaluate) {
            mainrisk::cli::cmd_evaluate(cfg);
        } else if (active == rank) {
            mainrisk::cli::cmd_rank(cfg);
        } else if (active == calibrate) {
            mainrisk::cli::cmd_calibrate(cfg);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
