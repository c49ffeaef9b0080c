#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "edgedispatch/config_io.hpp"

using namespace edgedispatch;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBinary = CLI_BINARY_PATH;
const fs::path kTmp = TEST_TMP_DIR;

int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
    std::string cmd = kBinary + " " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file.string() + " 2>/dev/null";
    else cmd += " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_small_config(const fs::path& path, std::uint64_t seed) {
    json doc;
    doc["preset"] = "tiny";
    doc["run"] = {{"slots", 300}, {"replications", 4}, {"seed", seed}, {"warmup", 50},
                  {"threads", 2}};
    doc["policy"] = {{"kinds", {"proposed", "sqf", "suf", "scf", "random"}},
                     {"expectation_mode", "exact"},
                     {"enumeration_cap", 100000},
                     {"des_form", "power"},
                     {"baseline", "scf"}};
    std::ofstream out(path);
    out << doc.dump(2);
}

} // namespace

TEST_CASE("simulate writes the contracted file set") {
    fs::create_directories(kTmp);
    fs::path cfg = kTmp / "small.json";
    write_small_config(cfg, 7);
    fs::path out = kTmp / "run1";
    fs::remove_all(out);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out.string()) == 0);

    for (const char* name : {"proposed", "sqf", "suf", "scf", "random"}) {
        CHECK(fs::exists(out / ("cdf_" + std::string(name) + ".csv")));
        CHECK(fs::exists(out / ("trace_" + std::string(name) + ".csv")));
    }
    CHECK(fs::exists(out / "summary.json"));

    // Digest consistency across all files of one run.
    json summary = json::parse(slurp(out / "summary.json"));
    std::string digest = summary.at("config_digest");
    for (const auto& entry : fs::directory_iterator(out)) {
        if (entry.path().extension() != ".csv") continue;
        std::string head = slurp(entry.path()).substr(0, 64);
        CHECK(head.find("# config_digest=" + digest) == 0);
    }
    CHECK(summary.contains("git_describe"));
    CHECK(summary.at("policies").contains("proposed"));
}

TEST_CASE("simulate is byte-identical across reruns") {
    fs::create_directories(kTmp);
    fs::path cfg = kTmp / "det.json";
    write_small_config(cfg, 99);
    fs::path out1 = kTmp / "det1", out2 = kTmp / "det2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out1.string()) == 0);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out2.string()) == 0);
    for (const char* name : {"trace_proposed.csv", "cdf_proposed.csv", "trace_random.csv",
                             "cdf_sqf.csv"}) {
        CHECK(slurp(out1 / name) == slurp(out2 / name));
        CHECK(!slurp(out1 / name).empty());
    }
}

TEST_CASE("value dump contains the geometric-series fixture") {
    // lambda=0, U=2, gamma=0.9: d_AP(1) = 1.81818..., printed in the table.
    json doc;
    doc["system"] = {{"num_aps", 1},
                     {"num_servers", 1},
                     {"num_types", 1},
                     {"arrival_prob", {{0.0}}},
                     {"mean_upload_delay", {{{2.0}}}},
                     {"comp_time_pmf", {{{1.0}}}},
                     {"discount", 0.9},
                     {"overflow_weight", 5.0},
                     {"n_max", 1},
                     {"l_max", 2},
                     {"eta_max", 1}};
    fs::create_directories(kTmp);
    fs::path cfg = kTmp / "fixture.json";
    {
        std::ofstream out(cfg);
        out << doc.dump(2);
    }
    fs::path stdout_file = kTmp / "value_out.json";
    REQUIRE(run_cli("value --config " + cfg.string(), stdout_file) == 0);
    json parsed = json::parse(slurp(stdout_file));
    double d1 = parsed.at("d_ap").at(0).at("values").at(1).get<double>();
    CHECK(d1 == doctest::Approx(1.0 / 0.55).epsilon(1e-9));
    CHECK(parsed.at("v_baseline").get<double>() == doctest::Approx(0.0)); // empty state

    // Round trip: the dumped resolved config parses back to the same digest.
    ExperimentConfig reparsed = parse_config(parsed.at("resolved_config"));
    CHECK(config_digest(reparsed) == parsed.at("config_digest").get<std::string>());
}

TEST_CASE("oracle succeeds on the tiny preset and refuses oversized configs") {
    fs::create_directories(kTmp);
    fs::path out = kTmp / "oracle_out";
    fs::remove_all(out);
    CHECK(run_cli("oracle --preset tiny --out " + out.string()) == 0);
    CHECK(fs::exists(out / "oracle.csv"));
    json doc = json::parse(slurp(out / "oracle.json"));
    CHECK(doc.at("bound_holds").get<bool>());
    CHECK(doc.at("states").get<int>() == 400);
    CHECK(doc.at("bellman_residual").get<double>() < 1e-6);
    CHECK(doc.at("min_improvement_margin").get<double>() >= -1e-9);

    // Refusal path: force a tiny cap; the message cites the computed count.
    fs::path msg = kTmp / "refusal.txt";
    std::string cmd = kBinary + " oracle --preset tiny --max-states 10 2> " + msg.string() +
                      " > /dev/null";
    int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    CHECK(slurp(msg).find("400") != std::string::npos);
}

TEST_CASE("bad configs exit with code 1 and a diagnostic") {
    fs::create_directories(kTmp);
    fs::path cfg = kTmp / "bad.json";
    {
        std::ofstream out(cfg);
        out << R"({"preset": "tiny", "oops": 1})";
    }
    fs::path msg = kTmp / "bad_err.txt";
    std::string cmd = kBinary + " simulate --config " + cfg.string() + " --out " +
                      (kTmp / "bad_out").string() + " 2> " + msg.string() + " > /dev/null";
    int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 1);
    CHECK(slurp(msg).find("oops") != std::string::npos);

    CHECK(run_cli("simulate") == 1); // no config/preset
}

TEST_CASE("preset flag selects the regime parameters") {
    fs::create_directories(kTmp);
    fs::path out = kTmp / "preset_run";
    fs::remove_all(out);
    REQUIRE(run_cli("simulate --preset upload-dominant --policies sqf --slots 50 --reps 2 "
                    "--warmup 0 --threads 2 --out " +
                    out.string()) == 0);
    json summary = json::parse(slurp(out / "summary.json"));
    auto resolved = summary.at("resolved_config");
    CHECK(resolved.at("system").at("eta_max").get<int>() == 1);
    CHECK(resolved.at("system").at("mean_upload_delay")[0][0][0].get<double>() == 10.0);
    CHECK(summary.at("preset").get<std::string>() == "upload-dominant");
}
