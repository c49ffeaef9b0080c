#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "edgedispatch/model.hpp"
#include "edgedispatch/valuefn.hpp"
#include "test_helpers.hpp"

using namespace edgedispatch;
using edgedispatch::testing::one_chain_config;
using edgedispatch::testing::tiny_config;

namespace {

/// Independent Monte-Carlo estimate of the discounted in-flight cost of one
/// upload chain, simulating the raw dynamics (arrival, binomial departures,
/// cap clamp) without any matrix machinery.
std::pair<double, double> mc_chain_cost(double lambda, double ubar, int n_max, double gamma,
                                        int start, long trajectories, std::uint64_t seed) {
    const int horizon = truncation_horizon(gamma, static_cast<double>(n_max), 1e-5);
    RngStream rng(derive_seed(seed, 0, 0));
    double sum = 0.0, sumsq = 0.0;
    for (long i = 0; i < trajectories; ++i) {
        int n = start;
        double total = 0.0, w = 1.0;
        for (int t = 1; t <= horizon; ++t) {
            total += w * n;
            w *= gamma;
            int d = 0;
            for (int s = 0; s < n; ++s)
                if (rng.next_bernoulli(1.0 / ubar)) ++d;
            int a = rng.next_bernoulli(lambda) ? 1 : 0;
            n = std::min(n + a - d, n_max);
        }
        sum += total;
        sumsq += total * total;
    }
    double mean = sum / trajectories;
    double var = (sumsq - trajectories * mean * mean) / (trajectories - 1.0);
    return {mean, std::sqrt(var / trajectories)};
}

} // namespace

TEST_CASE("d_ap fixture: lambda=0, U=2, gamma=0.9 gives 1/(1-0.45)") {
    auto config = one_chain_config(0.0, 2.0);
    BaselinePolicy pi(1, 1);
    ValueTables tables(config, pi);
    CHECK(tables.d_ap(0, 0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tables.d_ap(0, 0, 0, 1) == doctest::Approx(1.0 / 0.55).epsilon(1e-9));
}

TEST_CASE("d_ap at vanishing discount reduces to the immediate count") {
    auto config = one_chain_config(0.4, 3.0, /*n_max=*/3);
    config.discount = 1e-9;
    BaselinePolicy pi(1, 1);
    ValueTables tables(config, pi);
    for (int n = 0; n <= 3; ++n)
        CHECK(tables.d_ap(0, 0, 0, n) == doctest::Approx(static_cast<double>(n)).epsilon(1e-6));
}

TEST_CASE("d_ap matches an independent Monte-Carlo chain simulation") {
    struct Case {
        double lambda, ubar, gamma;
        int n_max, start;
    };
    for (const Case& c : {Case{0.3, 2.5, 0.9, 3, 2}, Case{0.0, 4.0, 0.95, 2, 2},
                          Case{0.6, 1.5, 0.85, 4, 0}}) {
        auto config = one_chain_config(c.lambda, c.ubar, c.n_max);
        config.discount = c.gamma;
        BaselinePolicy pi(1, 1);
        ValueTables tables(config, pi);
        auto [mc, se] = mc_chain_cost(c.lambda, c.ubar, c.n_max, c.gamma, c.start, 100'000, 1234);
        double exact = tables.d_ap(0, 0, 0, c.start);
        CHECK(std::abs(mc - exact) < 3.0 * se + 1e-4);
    }
}

TEST_CASE("non-fed chains use a pure-death process") {
    // Two servers; baseline feeds server 0, so the (k, m=1) chain must decay.
    SystemConfig config = tiny_config();
    BaselinePolicy pi(2, 1); // both APs -> server 0
    ValueTables tables(config, pi);
    // d_ap for server 1 with N=1: discounted sum of E[N(t)] for a pure-death
    // chain with rate 1/5: sum_t gamma^{t-1} (1-1/5)^{t-1} = 1/(1-0.9*4/5).
    CHECK(tables.d_ap(0, 0, 1, 1) == doctest::Approx(1.0 / (1.0 - 0.9 * 0.8)).epsilon(1e-9));
}

TEST_CASE("arrival rate profile of a pure-death feeder") {
    // K=1 routed, lambda=0, N=1, U=2: alpha(t) = 0.5^t.
    auto config = one_chain_config(0.0, 2.0);
    BaselinePolicy pi(1, 1);
    ValueTables tables(config, pi);
    TypeState ts(1, 1);
    ts.n(0, 0) = 1;
    auto alpha = tables.arrival_rate_profile(0, 0, ts);
    CHECK(alpha[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alpha[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(alpha[2] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("profile is zero when no AP feeds the server") {
    SystemConfig config = tiny_config();
    BaselinePolicy pi(2, 1); // both APs -> server 0; server 1 unfed
    ValueTables tables(config, pi);
    TypeState ts(2, 2);
    ts.n(0, 1) = 1; // in-flight to server 1, but not a baseline feeder
    auto alpha = tables.arrival_rate_profile(0, 1, ts);
    for (double a : alpha) CHECK(a == 0.0);
}

TEST_CASE("profile is bounded by K * n_max / min upload mean") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{1.0}, {1.0}};
    BaselinePolicy pi(2, 1);
    ValueTables tables(config, pi);
    TypeState ts(2, 2);
    ts.n(0, 0) = 1;
    ts.n(1, 0) = 1;
    auto alpha = tables.arrival_rate_profile(0, 0, ts);
    for (double a : alpha) CHECK(a <= 2.0 * 1.0 / 2.0 + 1e-12);
}

TEST_CASE("d_es fixtures") {
    SUBCASE("empty queue with zero profile costs nothing") {
        auto config = one_chain_config(0.0, 2.0);
        BaselinePolicy pi(1, 1);
        ValueTables tables(config, pi);
        TypeState ts(1, 1);
        CHECK(tables.d_es(0, 0, ts) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("single departing job costs exactly its one queued slot") {
        // L=1, eta=1, f(1)=1, alpha == 0: cost 1 now, idle forever after.
        auto config = one_chain_config(0.0, 2.0, 1, /*l_max=*/2, /*eta_max=*/1);
        BaselinePolicy pi(1, 1);
        ValueTables tables(config, pi);
        TypeState ts(1, 1);
        ts.q(0) = {1, 1};
        CHECK(tables.d_es(0, 0, ts) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("deterministic two-slot job") {
        // L=1, eta=2, f(2)=1, alpha == 0, gamma=0.9: costs 1 + 0.9.
        auto config = one_chain_config(0.0, 2.0, 1, 2, 2);
        config.comp_time_pmf = {{{0.0, 1.0}}};
        BaselinePolicy pi(1, 1);
        ValueTables tables(config, pi);
        TypeState ts(1, 1);
        ts.q(0) = {1, 2};
        CHECK(tables.d_es(0, 0, ts) == doctest::Approx(1.0 + 0.9).epsilon(1e-9));
    }
}

TEST_CASE("w_j composes d_ap and d_es") {
    auto config = one_chain_config(0.0, 2.0);
    BaselinePolicy pi(1, 1);
    ValueTables tables(config, pi);
    TypeState ts(1, 1);
    ts.n(0, 0) = 1;
    ts.q(0) = {1, 1};
    CHECK(tables.w_j(0, ts) ==
          doctest::Approx(tables.d_ap(0, 0, 0, 1) + tables.d_es(0, 0, ts)).epsilon(1e-12));
    SystemState full(1, 1, 1);
    full.types[0] = ts;
    CHECK(tables.v_baseline(full) == doctest::Approx(tables.w_j(0, ts)).epsilon(1e-12));
}

TEST_CASE("v_baseline is additive and symmetric across type labels") {
    SystemConfig config = tiny_config();
    config.num_types = 2;
    config.arrival_prob = {{0.1, 0.2}, {0.15, 0.05}};
    config.mean_upload_delay = {{{2.0, 3.0}, {2.5, 2.0}}, {{3.0, 2.0}, {2.0, 4.0}}};
    config.comp_time_pmf = {{{0.7, 0.3}, {0.5, 0.5}}, {{0.3, 0.7}, {1.0, 0.0}}};
    BaselinePolicy pi(2, 2);
    pi.dest(0, 0) = 0;
    pi.dest(1, 0) = 1;
    pi.dest(0, 1) = 1;
    pi.dest(1, 1) = 0;
    ValueTables tables(config, pi);

    SystemState s(2, 2, 2);
    s.n(0, 0, 0) = 1;
    s.n(1, 1, 1) = 1;
    s.q(0, 1) = {1, 2};
    s.q(1, 0) = {2, 1};
    double direct = tables.v_baseline(s);
    double summed = tables.w_j(0, s.types[0]) + tables.w_j(1, s.types[1]);
    CHECK(direct == doctest::Approx(summed).epsilon(1e-12));

    // Swap the two type labels everywhere; the value must not change.
    SystemConfig swapped = config;
    std::swap(swapped.arrival_prob[0][0], swapped.arrival_prob[0][1]);
    std::swap(swapped.arrival_prob[1][0], swapped.arrival_prob[1][1]);
    std::swap(swapped.mean_upload_delay[0][0], swapped.mean_upload_delay[0][1]);
    std::swap(swapped.mean_upload_delay[1][0], swapped.mean_upload_delay[1][1]);
    std::swap(swapped.comp_time_pmf[0][0], swapped.comp_time_pmf[0][1]);
    std::swap(swapped.comp_time_pmf[1][0], swapped.comp_time_pmf[1][1]);
    BaselinePolicy pi2(2, 2);
    pi2.dest(0, 0) = pi.dest(0, 1);
    pi2.dest(1, 0) = pi.dest(1, 1);
    pi2.dest(0, 1) = pi.dest(0, 0);
    pi2.dest(1, 1) = pi.dest(1, 0);
    ValueTables tables2(swapped, pi2);
    SystemState s2(2, 2, 2);
    s2.types[0] = s.types[1];
    s2.types[1] = s.types[0];
    CHECK(tables2.v_baseline(s2) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("d_es is stable when the truncation horizon grows by half") {
    SystemConfig config = tiny_config();
    BaselinePolicy pi = baseline_scf(config);
    ValueTables base(config, pi, DesForm::power, 1e-6);
    ValueTables finer(config, pi, DesForm::power, 1e-6 * std::pow(config.discount, base.t_trunc() / 2.0));
    CHECK(finer.t_trunc() >= base.t_trunc() * 3 / 2);
    TypeState ts(2, 2);
    ts.n(0, 0) = 1;
    ts.q(0) = {2, 1};
    ts.q(1) = {1, 2};
    for (int m = 0; m < 2; ++m)
        CHECK(std::abs(base.d_es(0, m, ts) - finer.d_es(0, m, ts)) < 1e-6);
}

TEST_CASE("power and chain series coincide on constant profiles") {
    // With no feeders the profile is identically zero, so the as-written
    // power form and the chained product agree exactly.
    auto config = one_chain_config(0.0, 2.0, 1, 3, 2);
    config.comp_time_pmf = {{{0.4, 0.6}}};
    BaselinePolicy pi(1, 1);
    ValueTables power(config, pi, DesForm::power);
    ValueTables chain(config, pi, DesForm::chain);
    TypeState ts(1, 1);
    ts.q(0) = {3, 2};
    CHECK(power.d_es(0, 0, ts) == doctest::Approx(chain.d_es(0, 0, ts)).epsilon(1e-10));
}

TEST_CASE("monte-carlo baseline value matches sum of d_ap on the upload part") {
    // Simulate the baseline policy and accumulate only the in-flight part of
    // the cost; Lemma 1 is exact for it.
    SystemConfig config = tiny_config();
    BaselinePolicy pi = baseline_scf(config);
    ValueTables tables(config, pi);

    SystemState start(2, 2, 1);
    start.n(0, 0, 0) = 1;
    start.n(1, 0, 1) = 1;

    double expected = 0.0;
    for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 2; ++m) expected += tables.d_ap(k, 0, m, start.n(k, 0, m));

    const int horizon = truncation_horizon(config.discount, 4.0, 1e-5);
    const long reps = 60'000;
    double sum = 0.0, sumsq = 0.0;
    DispatchAction action(2, 1);
    for (int k = 0; k < 2; ++k) action.dest(k, 0) = pi.dest(k, 0);
    for (long r = 0; r < reps; ++r) {
        TrajectoryRng rng(555, static_cast<std::uint64_t>(r));
        SystemState state = start;
        double total = 0.0, w = 1.0;
        for (int t = 1; t <= horizon; ++t) {
            double inflight = 0.0;
            for (int v : state.types[0].in_flight) inflight += v;
            total += w * inflight;
            w *= config.discount;
            state = step(config, state, action, rng).first;
        }
        sum += total;
        sumsq += total * total;
    }
    double mean = sum / reps;
    double se = std::sqrt((sumsq - reps * mean * mean) / (reps - 1.0) / reps);
    CHECK(std::abs(mean - expected) < 3.0 * se + 1e-4);
}

TEST_CASE("alpha clamps are counted") {
    SystemConfig config = tiny_config();
    config.arrival_prob = {{1.0}, {1.0}};
    config.mean_upload_delay = {{{1.0, 1.0}}, {{1.0, 1.0}}};
    BaselinePolicy pi(2, 1); // both feed server 0
    ValueTables tables(config, pi);
    TypeState ts(2, 2);
    ts.n(0, 0) = 1;
    ts.n(1, 0) = 1;
    (void)tables.arrival_rate_profile(0, 0, ts); // alpha(1) = 2 -> clamped
    CHECK(tables.clamp_events() > 0);
}
