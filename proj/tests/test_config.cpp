#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "edgedispatch/config_io.hpp"

using namespace edgedispatch;
using nlohmann::json;

TEST_CASE("all presets validate and report expected shapes") {
    for (const auto& name : preset_names()) {
        ExperimentConfig e = make_preset(name);
        CHECK_NOTHROW(e.system.validate());
        CHECK(e.preset == name);
    }
    ExperimentConfig tiny = make_preset("tiny");
    CHECK(tiny.system.num_aps == 2);
    CHECK(tiny.system.num_servers == 2);
    CHECK(tiny.system.num_types == 1);

    ExperimentConfig comparable = make_preset("comparable");
    CHECK(comparable.system.num_aps == 5);
    CHECK(comparable.system.num_servers == 3);
    CHECK(comparable.system.num_types == 10);
    // Caption anchors: first AP/type/server.
    CHECK(comparable.system.mean_upload_delay[0][0][0] == doctest::Approx(10.0));
    CHECK(comparable.system.comp_time_pmf[0][0][9] > 0.0);  // 10 slots possible
    CHECK(comparable.system.comp_time_pmf[0][0][14] > 0.0); // 15 slots possible

    ExperimentConfig upload = make_preset("upload-dominant");
    CHECK(upload.system.mean_upload_delay[0][0][0] == doctest::Approx(10.0));
    CHECK(upload.system.comp_time_mean(0, 0) == doctest::Approx(1.0));

    ExperimentConfig compute = make_preset("compute-dominant");
    CHECK(compute.system.mean_upload_delay[0][0][0] == doctest::Approx(1.0));
    CHECK(compute.system.comp_time_mean(0, 0) >= 10.0);
}

TEST_CASE("unknown preset is rejected") {
    CHECK_THROWS_AS(make_preset("nope"), std::invalid_argument);
}

TEST_CASE("config round-trips through json") {
    ExperimentConfig e = make_preset("tiny");
    json doc = to_json(e);
    ExperimentConfig back = parse_config(doc);
    CHECK(to_json(back) == doc);
    CHECK(config_digest(back) == config_digest(e));
}

TEST_CASE("unknown fields are rejected with the field name") {
    json doc = to_json(make_preset("tiny"));
    doc["surprise"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("surprise"), std::invalid_argument);

    json doc2 = to_json(make_preset("tiny"));
    doc2["system"]["typo_field"] = 2;
    CHECK_THROWS_WITH_AS(parse_config(doc2), doctest::Contains("typo_field"), std::invalid_argument);
}

TEST_CASE("schema version is checked") {
    json doc = to_json(make_preset("tiny"));
    doc["schema_version"] = 7;
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("schema_version"),
                         std::invalid_argument);
}

TEST_CASE("semantic validation failures name the offending field") {
    json doc = to_json(make_preset("tiny"));
    doc["system"]["arrival_prob"][0][0] = 1.5;
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("arrival_prob"),
                         std::invalid_argument);

    json doc2 = to_json(make_preset("tiny"));
    doc2["system"]["comp_time_pmf"][0][0] = {0.5, 0.4}; // sums to 0.9
    CHECK_THROWS_WITH_AS(parse_config(doc2), doctest::Contains("comp_time_pmf"),
                         std::invalid_argument);
}

TEST_CASE("preset field loads the preset, explicit sections override") {
    json doc;
    doc["preset"] = "tiny";
    doc["run"] = {{"slots", 77}, {"replications", 3}, {"seed", 9}, {"warmup", 0}, {"threads", 1}};
    ExperimentConfig e = parse_config(doc);
    CHECK(e.system.num_aps == 2); // from the preset
    CHECK(e.run.slots == 77);     // overridden
}

TEST_CASE("explicit baseline routes are honored and validated") {
    json doc = to_json(make_preset("tiny"));
    doc["policy"]["baseline"] = "explicit";
    doc["policy"]["baseline_routes"] = {1, 0};
    ExperimentConfig e = parse_config(doc);
    BaselinePolicy b = e.make_baseline();
    CHECK(b.dest(0, 0) == 1);
    CHECK(b.dest(1, 0) == 0);

    doc["policy"]["baseline_routes"] = {2, 0}; // out of range
    CHECK_THROWS(parse_config(doc).make_baseline());
}

TEST_CASE("digest changes when parameters change") {
    ExperimentConfig a = make_preset("tiny");
    ExperimentConfig b = a;
    b.run.seed = a.run.seed + 1;
    CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("format_double is locale-independent 12-digit") {
    CHECK(format_double(1.0 / 0.55) == "1.81818181818");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(12345.0) == "12345");
}

TEST_CASE("state parsing validates dimensions") {
    json doc = to_json(make_preset("tiny"));
    doc["state"] = {{"in_flight", {{{1, 0}}, {{0, 1}}}},
                    {"queues", {{{1, 2}}, {{0, 0}}}}};
    ExperimentConfig e = parse_config(doc);
    REQUIRE(e.state.has_value());
    CHECK(e.state->n(0, 0, 0) == 1);
    CHECK(e.state->n(1, 0, 1) == 1);
    CHECK(e.state->q(0, 0) == QueueState{1, 2});
}
