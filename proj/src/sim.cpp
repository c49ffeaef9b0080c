#include "edgedispatch/sim.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <atomic>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <thread>

namespace edgedispatch {

namespace {

struct RepResult {
    std::vector<double> trace;
    double mean_cost = 0.0;
    double discounted = 0.0;
    long long arrivals = 0;
    long long overflow = 0;
    long long inflight_drops = 0;
    long long completed = 0;
    double sojourn_sum = 0.0;
    std::vector<double> latency_us;
};

/// FIFO tags mirroring the anonymous counts so per-job sojourns can be
/// measured: arrival slots of in-flight jobs per (k,j,m) and of queued jobs
/// per (m,j). Attribution is FIFO; the mean is attribution-independent.
struct JobTags {
    std::vector<std::deque<long>> in_flight; // [ (k*J+j)*M+m ]
    std::vector<std::deque<long>> queued;    // [ m*J+j ]

    JobTags(int K, int M, int J)
        : in_flight(static_cast<std::size_t>(K) * J * M), queued(static_cast<std::size_t>(M) * J) {}
};

RepResult simulate_one(const SystemConfig& config, const PolicyEngine& policy, const RunSpec& spec,
                       long rep) {
    const int K = config.num_aps;
    const int M = config.num_servers;
    const int J = config.num_types;
    const double gamma = config.discount;

    TrajectoryRng rng(spec.seed, static_cast<std::uint64_t>(rep));
    SystemState state(K, M, J);
    JobTags tags(K, M, J);

    RepResult res;
    res.trace.resize(static_cast<std::size_t>(spec.slots));

    double weight = 1.0;
    for (long t = 1; t <= spec.slots; ++t) {
        const double cost = stage_cost(config, state);
        res.trace[static_cast<std::size_t>(t - 1)] = cost;
        res.discounted += weight * cost;
        weight *= gamma;

        DispatchAction action;
        if ((t & 63) == 1) {
            auto t0 = std::chrono::steady_clock::now();
            action = policy.decide(state, rng);
            auto t1 = std::chrono::steady_clock::now();
            res.latency_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        } else {
            action = policy.decide(state, rng);
        }

        auto [next, ev] = step(config, state, action, rng);

        // Conservation: arrivals = d(in-flight) + d(queued) + computation
        // departures + overflow drops + in-flight-cap drops.
        long long arrivals = ev.total_arrivals();
        long long delta = 0, departures = 0, overflow = 0, capdrops = 0;
        for (int j = 0; j < J; ++j) {
            for (std::size_t i = 0; i < next.types[j].in_flight.size(); ++i)
                delta += next.types[j].in_flight[i] - state.types[j].in_flight[i];
            for (int m = 0; m < M; ++m) {
                delta += next.q(m, j).length - state.q(m, j).length;
                departures += ev.queue_departures[j][m];
                overflow += ev.overflow_drops[j][m];
            }
            for (int v : ev.inflight_drops[j]) capdrops += v;
        }
        if (arrivals != delta + departures + overflow + capdrops)
            throw std::logic_error("job conservation violated at slot " + std::to_string(t));

        res.arrivals += arrivals;
        res.overflow += overflow;
        res.inflight_drops += capdrops;

        // Job tags. Order inside a slot: completions move AP->queue in k
        // order, the head departs if eta was 1, dispatched arrivals join the
        // in-flight FIFOs, overflow drops discard the newest queue entrants.
        for (int j = 0; j < J; ++j)
            for (int m = 0; m < M; ++m) {
                auto& q = tags.queued[static_cast<std::size_t>(m) * J + j];
                if (ev.queue_departures[j][m] == 1) {
                    res.completed += 1;
                    res.sojourn_sum += static_cast<double>(t - q.front());
                    q.pop_front();
                }
                for (int k = 0; k < K; ++k) {
                    auto& fl = tags.in_flight[(static_cast<std::size_t>(k) * J + j) * M + m];
                    int d = ev.upload_completions[j][static_cast<std::size_t>(k) * M + m];
                    for (int i = 0; i < d; ++i) {
                        long arrival_slot = fl.front();
                        fl.pop_front();
                        if (static_cast<int>(q.size()) < config.l_max)
                            q.push_back(arrival_slot);
                        // else overflow: job discarded
                    }
                }
                assert(static_cast<int>(q.size()) == next.q(m, j).length);
            }
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < J; ++j)
                if (ev.arrivals[k][j] == 1) {
                    int m = action.dest(k, j);
                    if (ev.inflight_drops[j][static_cast<std::size_t>(k) * M + m] == 0)
                        tags.in_flight[(static_cast<std::size_t>(k) * J + j) * M + m].push_back(t);
                }

        state = std::move(next);
    }

    double post = 0.0;
    long post_count = 0;
    for (long t = spec.warmup; t < spec.slots; ++t) {
        post += res.trace[static_cast<std::size_t>(t)];
        ++post_count;
    }
    res.mean_cost = post_count > 0 ? post / static_cast<double>(post_count) : 0.0;
    return res;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void mean_and_stderr(const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
}

} // namespace

RunMetrics run(const SystemConfig& config, const PolicyEngine& policy, const RunSpec& spec) {
    config.validate();
    require(spec.slots >= 1, "slots must be >= 1");
    require(spec.replications >= 1, "replications must be >= 1");
    require(spec.warmup >= 0 && spec.warmup < spec.slots, "warmup must lie in [0, slots)");

    const long R = spec.replications;
    std::vector<RepResult> results(static_cast<std::size_t>(R));

    long threads = spec.num_threads > 0 ? spec.num_threads
                                        : static_cast<long>(std::thread::hardware_concurrency());
    threads = std::max<long>(1, std::min<long>(threads, R));

    std::atomic<long> next_rep{0};
    auto worker = [&] {
        while (true) {
            long r = next_rep.fetch_add(1);
            if (r >= R) break;
            results[static_cast<std::size_t>(r)] = simulate_one(config, policy, spec, r);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (long i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunMetrics out;
    out.slots = spec.slots;
    out.replications = R;
    out.warmup = spec.warmup;
    out.cost_trace.reserve(static_cast<std::size_t>(R));

    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(R) * (spec.slots - spec.warmup));
    double sojourn_sum = 0.0;
    for (auto& r : results) {
        out.mean_cost_per_rep.push_back(r.mean_cost);
        out.discounted_per_rep.push_back(r.discounted);
        out.total_arrivals += r.arrivals;
        out.overflow_drops += r.overflow;
        out.inflight_drops += r.inflight_drops;
        out.completed_jobs += r.completed;
        sojourn_sum += r.sojourn_sum;
        for (long t = spec.warmup; t < spec.slots; ++t)
            pooled.push_back(r.trace[static_cast<std::size_t>(t)]);
        out.decision_latency_us.insert(out.decision_latency_us.end(), r.latency_us.begin(),
                                       r.latency_us.end());
        out.cost_trace.push_back(std::move(r.trace));
    }
    out.mean_sojourn =
        out.completed_jobs > 0 ? sojourn_sum / static_cast<double>(out.completed_jobs) : 0.0;

    mean_and_stderr(out.mean_cost_per_rep, out.mean_cost, out.std_error_cost);
    mean_and_stderr(out.discounted_per_rep, out.mean_discounted, out.std_error_discounted);
    out.median_decision_latency_us = median_of(out.decision_latency_us);

    // Empirical CDF on unique values; quantile-thinned if enormous.
    std::sort(pooled.begin(), pooled.end());
    const double n = static_cast<double>(pooled.size());
    std::vector<std::pair<double, double>> cdf;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        if (i + 1 < pooled.size() && pooled[i + 1] == pooled[i]) continue;
        cdf.emplace_back(pooled[i], static_cast<double>(i + 1) / n);
    }
    if (cdf.size() > 100'000) {
        std::vector<std::pair<double, double>> thin;
        thin.reserve(10'000);
        for (std::size_t i = 0; i < 10'000; ++i)
            thin.push_back(cdf[i * cdf.size() / 10'000]);
        thin.push_back(cdf.back());
        cdf = std::move(thin);
    }
    out.cdf = std::move(cdf);
    return out;
}

ComparisonReport compare(const SystemConfig& config,
                         const std::vector<std::pair<std::string, const PolicyEngine*>>& policies,
                         const RunSpec& spec) {
    ComparisonReport report;
    for (const auto& [name, engine] : policies) {
        require(engine != nullptr, "null policy engine");
        report.entries.push_back({name, run(config, *engine, spec)});
    }

    for (std::size_t a = 0; a < report.entries.size(); ++a)
        for (std::size_t b = a + 1; b < report.entries.size(); ++b) {
            const auto& ma = report.entries[a].metrics.mean_cost_per_rep;
            const auto& mb = report.entries[b].metrics.mean_cost_per_rep;
            std::vector<double> diff(ma.size());
            for (std::size_t r = 0; r < ma.size(); ++r) diff[r] = ma[r] - mb[r];
            PairwiseDiff d;
            d.a = report.entries[a].name;
            d.b = report.entries[b].name;
            mean_and_stderr(diff, d.mean, d.std_error);
            d.ci_low = d.mean - 1.96 * d.std_error;
            d.ci_high = d.mean + 1.96 * d.std_error;
            report.pairwise.push_back(d);
        }
    return report;
}

} // namespace edgedispatch
