// Seeded trajectory engine and metrics: per-slot cost traces, discounted
// totals, cost CDFs, drop counts, sojourn diagnostics, decision latencies.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "edgedispatch/policy.hpp"

namespace edgedispatch {

struct RunSpec {
    long slots = 10'000;
    long replications = 50;
    std::uint64_t seed = 1;
    long warmup = 0; // leading slots excluded from the per-slot CDF
    int num_threads = 0; // 0: hardware concurrency
};

struct RunMetrics {
    long slots = 0;
    long replications = 0;
    long warmup = 0;

    /// cost_trace[rep][slot]: stage cost observed at each slot start.
    std::vector<std::vector<double>> cost_trace;
    std::vector<double> mean_cost_per_rep;  // post-warmup mean per replication
    std::vector<double> discounted_per_rep; // sum gamma^{t-1} cost_t (no warmup)

    double mean_cost = 0.0;
    double std_error_cost = 0.0;
    double mean_discounted = 0.0;
    double std_error_discounted = 0.0;

    /// Empirical CDF of the post-warmup per-slot cost, pooled across
    /// replications: (cost value, cumulative probability).
    std::vector<std::pair<double, double>> cdf;

    long long total_arrivals = 0;
    long long overflow_drops = 0;
    long long inflight_drops = 0;
    long long completed_jobs = 0;
    double mean_sojourn = 0.0; // slots from AP arrival to computation end

    std::vector<double> decision_latency_us; // sparse samples
    double median_decision_latency_us = 0.0;
};

/// Simulate one policy. Replications run on common-random-number sub-streams
/// derived from the seed; results are bit-identical for identical inputs
/// regardless of thread count.
RunMetrics run(const SystemConfig& config, const PolicyEngine& policy, const RunSpec& spec);

struct ComparisonEntry {
    std::string name;
    RunMetrics metrics;
};

struct PairwiseDiff {
    std::string a;
    std::string b;
    double mean = 0.0;      // mean over replications of (a - b) per-slot cost
    double std_error = 0.0; // paired standard error
    double ci_low = 0.0;    // 95% CI
    double ci_high = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonEntry> entries;
    std::vector<PairwiseDiff> pairwise;
};

/// Run several policies on the same seed/config and report paired differences.
ComparisonReport compare(const SystemConfig& config,
                         const std::vector<std::pair<std::string, const PolicyEngine*>>& policies,
                         const RunSpec& spec);

} // namespace edgedispatch
