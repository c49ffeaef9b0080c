#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "edgedispatch/oracle.hpp"
#include "edgedispatch/sim.hpp"
#include "test_helpers.hpp"

using namespace edgedispatch;
using edgedispatch::testing::one_chain_config;
using edgedispatch::testing::tiny_config;

namespace {

PolicyEngine engine_of(PolicyType type, const SystemConfig& config,
                       std::shared_ptr<const ValueTables> tables = nullptr) {
    PolicyKind kind;
    kind.type = type;
    return PolicyEngine(kind, config, std::move(tables));
}

} // namespace

TEST_CASE("zero arrivals give identically zero metrics") {
    auto config = one_chain_config(0.0, 2.0);
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 200;
    spec.replications = 4;
    spec.seed = 5;
    spec.num_threads = 1;
    auto metrics = run(config, sqf, spec);
    CHECK(metrics.mean_cost == 0.0);
    CHECK(metrics.mean_discounted == 0.0);
    CHECK(metrics.total_arrivals == 0);
    CHECK(metrics.overflow_drops == 0);
    for (const auto& trace : metrics.cost_trace)
        for (double c : trace) CHECK(c == 0.0);
}

TEST_CASE("identical specs give bit-identical metrics, independent of threads") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.5}, {0.6}};
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 400;
    spec.replications = 6;
    spec.seed = 99;
    spec.warmup = 50;

    spec.num_threads = 1;
    auto a = run(config, sqf, spec);
    spec.num_threads = 2;
    auto b = run(config, sqf, spec);
    CHECK(a.cost_trace == b.cost_trace);
    CHECK(a.mean_cost == b.mean_cost);
    CHECK(a.discounted_per_rep == b.discounted_per_rep);
    CHECK(a.cdf == b.cdf);
    CHECK(a.total_arrivals == b.total_arrivals);
    CHECK(a.mean_sojourn == b.mean_sojourn);
}

TEST_CASE("random policy uses its own stream so dynamics stay aligned") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.5}, {0.6}};
    PolicyEngine random = engine_of(PolicyType::random, config);
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 100;
    spec.replications = 2;
    spec.seed = 123;
    spec.num_threads = 1;
    auto a = run(config, random, spec);
    auto b = run(config, sqf, spec);
    // Common random numbers: same total arrival count either way.
    CHECK(a.total_arrivals == b.total_arrivals);
}

TEST_CASE("discounted total matches the trace recomputation") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.4}, {0.3}};
    PolicyEngine scf = engine_of(PolicyType::scf, config);
    RunSpec spec;
    spec.slots = 300;
    spec.replications = 3;
    spec.seed = 7;
    spec.num_threads = 1;
    auto metrics = run(config, scf, spec);
    for (long r = 0; r < spec.replications; ++r) {
        double total = 0.0, w = 1.0;
        for (long t = 0; t < spec.slots; ++t) {
            total += w * metrics.cost_trace[r][t];
            w *= config.discount;
        }
        CHECK(metrics.discounted_per_rep[r] == doctest::Approx(total).epsilon(1e-12));
    }
}

TEST_CASE("cdf matches an independent recomputation and is monotone") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.6}, {0.6}};
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 500;
    spec.replications = 4;
    spec.seed = 11;
    spec.warmup = 100;
    spec.num_threads = 1;
    auto metrics = run(config, sqf, spec);

    std::vector<double> pooled;
    for (const auto& trace : metrics.cost_trace)
        for (long t = spec.warmup; t < spec.slots; ++t) pooled.push_back(trace[t]);
    std::sort(pooled.begin(), pooled.end());

    double prev = 0.0;
    for (const auto& [cost, p] : metrics.cdf) {
        CHECK(p > prev);
        auto upper = std::upper_bound(pooled.begin(), pooled.end(), cost);
        double expected = static_cast<double>(upper - pooled.begin()) / pooled.size();
        CHECK(p == doctest::Approx(expected).epsilon(1e-12));
        prev = p;
    }
    CHECK(metrics.cdf.back().second == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("warmup only removes leading slots from the cdf pool") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.5}, {0.5}};
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 200;
    spec.replications = 2;
    spec.seed = 3;
    spec.num_threads = 1;
    spec.warmup = 0;
    auto all = run(config, sqf, spec);
    spec.warmup = 150;
    auto tail = run(config, sqf, spec);
    CHECK(all.cost_trace == tail.cost_trace); // trajectories unaffected
    // Post-warmup mean uses only the last 50 slots.
    for (long r = 0; r < 2; ++r) {
        double mean = 0.0;
        for (long t = 150; t < 200; ++t) mean += tail.cost_trace[r][t];
        mean /= 50.0;
        CHECK(tail.mean_cost_per_rep[r] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("baseline mean discounted total matches exact oracle evaluation") {
    SystemConfig config = tiny_config();
    auto tables = std::make_shared<ValueTables>(config, baseline_scf(config));
    PolicyEngine baseline = engine_of(PolicyType::baseline, config, tables);

    auto mdp = enumerate_mdp(config);
    auto exact = policy_evaluation_exact(mdp, config.discount, policy_action_table(mdp, baseline));
    SystemState empty(2, 2, 1);
    const double v_exact = exact(mdp.state_index(empty));

    RunSpec spec;
    spec.slots = truncation_horizon(config.discount, max_stage_cost(config), 1e-6);
    spec.replications = 10'000;
    spec.seed = 2027;
    spec.num_threads = 2;
    auto metrics = run(config, baseline, spec);
    CHECK(std::abs(metrics.mean_discounted - v_exact) <
          3.0 * metrics.std_error_discounted + 1e-3);
}

TEST_CASE("comparing a policy against itself gives exactly zero difference") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{0.4}, {0.4}};
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 200;
    spec.replications = 3;
    spec.seed = 17;
    spec.num_threads = 1;
    auto report = compare(config, {{"a", &sqf}, {"b", &sqf}}, spec);
    REQUIRE(report.pairwise.size() == 1);
    CHECK(report.pairwise[0].mean == 0.0);
    CHECK(report.pairwise[0].std_error == 0.0);
}

TEST_CASE("sojourn diagnostics count completed jobs") {
    auto config = one_chain_config(1.0, 1.0, 2, 3, 1);
    // Every slot one arrival, uploads finish next slot, computation takes one
    // slot: in steady state each job spends exactly 2 slots in the system.
    PolicyEngine sqf = engine_of(PolicyType::sqf, config);
    RunSpec spec;
    spec.slots = 3000;
    spec.replications = 1;
    spec.seed = 23;
    spec.num_threads = 1;
    auto metrics = run(config, sqf, spec);
    CHECK(metrics.completed_jobs > 2900);
    CHECK(metrics.mean_sojourn == doctest::Approx(2.0).epsilon(1e-6));
}
