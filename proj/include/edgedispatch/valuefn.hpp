// Closed-form value function of the fixed baseline dispatching policy:
// per-chain discounted upload costs, per-queue discounted costs driven by a
// Bernoulli approximation of the aggregate arrival stream, and their sum W_j.
#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edgedispatch/markov.hpp"
#include "edgedispatch/types.hpp"

namespace edgedispatch {

/// Time-invariant routing: AP k always sends type j to route(k, j).
struct BaselinePolicy {
    int num_aps = 0;
    int num_types = 0;
    std::vector<int> route; // [k*J + j]

    BaselinePolicy() = default;
    BaselinePolicy(int K, int J)
        : num_aps(K), num_types(J), route(static_cast<std::size_t>(K) * J, 0) {}

    int dest(int k, int j) const { return route[static_cast<std::size_t>(k) * num_types + j]; }
    int& dest(int k, int j) { return route[static_cast<std::size_t>(k) * num_types + j]; }
};

/// Fixed policy routing every (k,j) to the server with the smallest expected
/// computation time (ties to the lowest index).
BaselinePolicy baseline_scf(const SystemConfig& config);

/// Fixed policy routing every (k,j) to the server with the smallest mean
/// upload delay.
BaselinePolicy baseline_suf(const SystemConfig& config);

/// How the queue-cost series treats the time-varying arrival rate: `power`
/// raises the single matrix P(alpha(t-1)) to the (t-1)-th power per term;
/// `chain` multiplies the per-slot matrices P(alpha(1))...P(alpha(t-1)).
/// The two coincide when the profile is constant.
enum class DesForm { power, chain };

/// Sparse row-major kernel of the queue chain, stored at its two arrival
/// extremes so P(alpha) = (1-alpha)*P0 + alpha*P1 costs two gathers per apply.
struct QueueKernel {
    using SparseRows = std::vector<std::vector<std::pair<int, double>>>;
    SparseRows no_arrival;  // P(0)
    SparseRows one_arrival; // P(1)
    int dim = 0;

    void apply(double alpha, const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
};

/// Precomputed value-function machinery for one (config, baseline) pair.
/// Thread-safe: lookups share caches guarded by a shared mutex; all cached
/// values are pure functions of their keys.
class ValueTables {
public:
    ValueTables(const SystemConfig& config, const BaselinePolicy& baseline,
                DesForm des_form = DesForm::power, double eps_trunc = 1e-6);

    const SystemConfig& config() const { return config_; }
    const BaselinePolicy& baseline() const { return baseline_; }
    DesForm des_form() const { return des_form_; }
    int t_trunc() const { return t_trunc_; }

    /// Discounted expected cumulative in-flight count of chain (k,j,m),
    /// indexed by the starting count.
    const Eigen::VectorXd& d_ap_table(int k, int j, int m) const;
    double d_ap(int k, int j, int m, int n) const { return d_ap_table(k, j, m)(n); }

    /// Expected in-flight count of the baseline-fed chain (k, j -> its
    /// baseline server) after t-1 further slots, from count n at t=1.
    double expected_inflight(int k, int j, int t, int n) const;

    /// APs whose baseline route for type j is m, ascending.
    const std::vector<int>& feeders(int j, int m) const;

    /// Bernoulli arrival-rate profile alpha(1..t_trunc) of queue (m,j) given
    /// the current in-flight counts of its feeders; clamped to [0,1].
    std::vector<double> arrival_rate_profile(int j, int m, const TypeState& state) const;

    /// Discounted queue cost of (m,j) from the given per-type state.
    double d_es(int j, int m, const TypeState& state) const;

    /// Queue-cost vector for a literal feeder in-flight vector (one entry per
    /// feeder of (j,m), in feeder order). Entry i is the cost from encoded
    /// queue state i. Cached.
    const Eigen::VectorXd& es_vector(int j, int m, const std::vector<int>& feeder_n) const;

    /// Queue-cost vector under the expected arrival-rate profile induced by
    /// feeder marginals: each feeder contributes its one-step successor
    /// distribution from (current count, whether this slot's arrival is
    /// routed to it). Cached.
    const Eigen::VectorXd& es_vector_marginal(int j, int m,
                                              const std::vector<std::pair<int, int>>& feeder_key) const;

    /// Eq.-17 composition: sum of d_ap over (k,m) plus d_es over m.
    double w_j(int j, const TypeState& state) const;
    double v_baseline(const SystemState& state) const;

    const QueueKernel& queue_kernel(int j, int m) const;
    const Eigen::VectorXd& queue_cost() const { return queue_cost_; }

    /// Number of alpha values clamped into [0,1] so far.
    long clamp_events() const { return clamp_events_.load(); }
    /// d_ap tables that were not non-decreasing in the starting count.
    long monotonicity_warnings() const { return monotonicity_warnings_.load(); }

private:
    Eigen::VectorXd compute_es_vector(int j, int m, const std::vector<double>& alpha) const;
    std::vector<double> profile_from_feeder_n(int j, int m, const std::vector<int>& feeder_n) const;
    double clamp_alpha(double a) const;

    SystemConfig config_;
    BaselinePolicy baseline_;
    DesForm des_form_;
    double eps_trunc_;
    int t_trunc_ = 1;

    // [k][j][m] -> table over starting count
    std::vector<Eigen::VectorXd> d_ap_;
    // [k][j] -> [t-1] -> vector over starting count (baseline-fed chain only)
    std::vector<std::vector<Eigen::VectorXd>> inflight_mean_;
    // [j][m]
    std::vector<std::vector<int>> feeders_;
    std::vector<QueueKernel> kernels_;
    Eigen::VectorXd queue_cost_;

    struct KeyHash {
        std::size_t operator()(const std::vector<std::int32_t>& v) const {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (std::int32_t x : v) {
                h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
                h *= 0x100000001b3ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };
    using EsCache = std::unordered_map<std::vector<std::int32_t>, Eigen::VectorXd, KeyHash>;
    mutable EsCache es_cache_;
    mutable EsCache es_cache_marginal_;
    mutable std::shared_mutex cache_mutex_;

    mutable std::atomic<long> clamp_events_{0};
    std::atomic<long> monotonicity_warnings_{0};

    std::size_t kj(int k, int j) const { return static_cast<std::size_t>(k) * config_.num_types + j; }
    std::size_t kjm(int k, int j, int m) const {
        return (static_cast<std::size_t>(k) * config_.num_types + j) * config_.num_servers + m;
    }
    std::size_t jm(int j, int m) const { return static_cast<std::size_t>(j) * config_.num_servers + m; }
};

} // namespace edgedispatch
