// Spawns the built binary and checks exit codes, file outputs and
// flag/config-file precedence. Usage: test_cli <path-to-mainrisk>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

#define CLI_CHECK(cond)                                                      \
    do {                                                                     \
        if (!(cond)) {                                                       \
            std::printf("FAILED %s:%d: %s\n", __FILE__, __LINE__, #cond);    \
            ++g_failures;                                                    \
        }                                                                    \
    } while (0)

std::string g_binary;

int run(const std::string& args, const std::string& log_name = "cli_log") {
    const std::string cmd = g_binary + " " + args + " > test_tmp/" + log_name +
                            ".out 2> test_tmp/" + log_name + ".err";
    const int status = std::system(cmd.c_str());
    if (status == -1) {
        return -1;
    }
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) { return testutil::read_text(p); }

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: test_cli <mainrisk binary>\n");
        return 1;
    }
    g_binary = argv[1];
    fs::create_directories("test_tmp");

    // --- synth: file set, determinism, usage errors -------------------------
    {
        const auto out1 = testutil::make_temp_dir("cli_synth1");
        const auto out2 = testutil::make_temp_dir("cli_synth2");
        const std::string flags =
            "synth --seed 42 --blocks 100 --streets 5 --years 12 --out ";
        CLI_CHECK(run(flags + out1.string()) == 0);
        CLI_CHECK(run(flags + out2.string()) == 0);
        for (const char* f :
             {"blocks.csv", "mains.csv", "work_orders.csv", "road_ratings.csv",
              "parcels.csv", "notebook.csv", "truth_hazards.csv"}) {
            CLI_CHECK(fs::exists(out1 / f));
            CLI_CHECK(slurp(out1 / f) == slurp(out2 / f));
        }
        CLI_CHECK(fs::exists(out1 / "run_config.json"));

        CLI_CHECK(run("synth --blocks 0 --out test_tmp/none") == 2);
        CLI_CHECK(run("synth --blocks 7 --streets 2 --out test_tmp/none") == 2);
        CLI_CHECK(run("bogus-subcommand") == 2);
    }

    // --- evaluate: outputs, determinism, data errors -------------------------
    {
        const auto data = testutil::make_temp_dir("cli_data");
        CLI_CHECK(run("synth --seed 9 --blocks 40 --streets 5 --years 12 --out " +
                      data.string()) == 0);

        const std::string common =
            " --data " + data.string() +
            " --lookback_years 5 --percent 10 --iterations 20 --seed 9";
        const auto out1 = testutil::make_temp_dir("cli_eval1");
        const auto out2 = testutil::make_temp_dir("cli_eval2");
        CLI_CHECK(run("evaluate" + common + " --out " + out1.string()) == 0);
        CLI_CHECK(run("evaluate" + common + " --out " + out2.string()) == 0);
        for (const char* f : {"report.json", "rankings.csv", "reliability.csv",
                              "pr_curve.csv", "rejects.csv", "model.json"}) {
            CLI_CHECK(fs::exists(out1 / f));
            CLI_CHECK(slurp(out1 / f) == slurp(out2 / f));
        }
        const auto report = nlohmann::json::parse(slurp(out1 / "report.json"));
        CLI_CHECK(report.at("splits").size() >= 1);
        CLI_CHECK(report.at("splits")[0].at("k").get<int>() == 4);  // 10% of 40
        CLI_CHECK(report.at("config").contains("seed"));
        CLI_CHECK(!report.at("config").contains("data_dir"));

        // The comparison table lands on stdout.
        const std::string table = slurp("test_tmp/cli_log.out");
        CLI_CHECK(table.find("gbdt") != std::string::npos);
        CLI_CHECK(table.find("past_breaks") != std::string::npos);

        // Missing input file: runtime error naming the file.
        fs::remove(data / "mains.csv");
        CLI_CHECK(run("evaluate" + common + " --out test_tmp/none", "missing") == 1);
        CLI_CHECK(slurp("test_tmp/missing.err").find("mains.csv") !=
                  std::string::npos);
    }

    // --- rank ----------------------------------------------------------------
    {
        const auto data = testutil::make_temp_dir("cli_rank_data");
        CLI_CHECK(run("synth --seed 4 --blocks 40 --streets 5 --years 12 --out " +
                      data.string()) == 0);
        const auto out = testutil::make_temp_dir("cli_rank_out");
        const std::string common = " --data " + data.string() +
                                   " --lookback_years 5 --iterations 20" +
                                   " --as_of 2014-01-01 --out ";
        CLI_CHECK(run("rank" + common + out.string()) == 0);
        CLI_CHECK(fs::exists(out / "rankings.csv"));
        CLI_CHECK(fs::exists(out / "model.json"));

        // Risk scores sit in [0, 100] in the third column.
        std::ifstream in(out / "rankings.csv");
        std::string line;
        std::getline(in, line);
        CLI_CHECK(line == "block_id,label,road_rating,risk_score,probability");
        int rows = 0;
        while (std::getline(in, line)) {
            const auto a = line.rfind(',');
            const auto b = line.rfind(',', a - 1);
            const int risk = std::stoi(line.substr(b + 1, a - b - 1));
            CLI_CHECK(risk >= 0 && risk <= 100);
            ++rows;
        }
        CLI_CHECK(rows == 40);

        const auto out2 = testutil::make_temp_dir("cli_rank_out2");
        CLI_CHECK(run("rank" + common + out2.string()) == 0);
        CLI_CHECK(slurp(out / "rankings.csv") == slurp(out2 / "rankings.csv"));

        // as_of earlier than any trainable reference is an error.
        CLI_CHECK(run("rank --data " + data.string() +
                      " --lookback_years 5 --as_of 2008-01-01 --out test_tmp/none",
                      "early") == 1);
    }

    // --- calibrate -----------------------------------------------------------
    {
        const auto data = testutil::make_temp_dir("cli_cal_data");
        CLI_CHECK(run("synth --seed 6 --blocks 40 --streets 5 --years 12 --out " +
                      data.string()) == 0);
        const auto out = testutil::make_temp_dir("cli_cal_out");
        CLI_CHECK(run("calibrate --data " + data.string() +
                      " --lookback_years 5 --iterations 10 --out " +
                      out.string()) == 0);
        CLI_CHECK(fs::exists(out / "reliability.csv"));
        CLI_CHECK(!fs::exists(out / "report.json"));
    }

    // --- config file vs flags --------------------------------------------------
    {
        const auto data = testutil::make_temp_dir("cli_cfg_data");
        CLI_CHECK(run("synth --seed 3 --blocks 40 --streets 5 --years 12 --out " +
                      data.string()) == 0);
        testutil::write_text("test_tmp/run.cfg",
                             "# experiment knobs\n"
                             "iterations = 5\n"
                             "lookback_years = 5\n"
                             "percent = 10\n");
        const auto out = testutil::make_temp_dir("cli_cfg_out");
        CLI_CHECK(run("evaluate --data " + data.string() +
                      " --config test_tmp/run.cfg --out " + out.string()) == 0);
        auto rc = nlohmann::json::parse(slurp(out / "run_config.json"));
        CLI_CHECK(rc.at("config").at("iterations").get<int>() == 5);

        // A flag with the same name wins over the file.
        const auto out2 = testutil::make_temp_dir("cli_cfg_out2");
        CLI_CHECK(run("evaluate --data " + data.string() +
                      " --config test_tmp/run.cfg --iterations 12 --out " +
                      out2.string()) == 0);
        rc = nlohmann::json::parse(slurp(out2 / "run_config.json"));
        CLI_CHECK(rc.at("config").at("iterations").get<int>() == 12);

        testutil::write_text("test_tmp/bad.cfg", "no_such_key = 1\n");
        CLI_CHECK(run("evaluate --data " + data.string() +
                      " --config test_tmp/bad.cfg --out test_tmp/none") == 2);
    }

    if (g_failures == 0) {
        std::printf("test_cli: all checks passed\n");
        return 0;
    }
    std::printf("test_cli: %d failures\n", g_failures);
    return 1;
}
