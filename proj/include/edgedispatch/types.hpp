// Core domain types: system configuration, per-type state, actions, slot events.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgedispatch {

/// Probability mass function over computation times {1..eta_max}.
/// pmf[x-1] is the probability of exactly x slots.
using CompTimePmf = std::vector<double>;

/// All model parameters of one system instance.
///
/// Indexing is 0-based throughout: APs k in [0,K), servers m in [0,M),
/// job types j in [0,J).
struct SystemConfig {
    int num_aps = 1;      // K
    int num_servers = 1;  // M
    int num_types = 1;    // J

    /// arrival_prob[k][j] in [0,1]: Bernoulli arrival probability per slot.
    std::vector<std::vector<double>> arrival_prob;

    /// mean_upload_delay[k][j][m] >= 1: mean of the geometric uploading
    /// delay, so 1/mean is the per-slot completion probability.
    std::vector<std::vector<std::vector<double>>> mean_upload_delay;

    /// comp_time_pmf[m][j]: PMF of the computation time on {1..eta_max}.
    std::vector<std::vector<CompTimePmf>> comp_time_pmf;

    double discount = 0.95;        // gamma in (0,1)
    double overflow_weight = 10.0; // beta >= 0

    int n_max = 3;   // in-flight cap per (k,j,m)
    int l_max = 5;   // queue cap per (m,j)
    int eta_max = 1; // max computation slots

    double arrival(int k, int j) const { return arrival_prob[k][j]; }
    double upload_mean(int k, int j, int m) const { return mean_upload_delay[k][j][m]; }
    const CompTimePmf& pmf(int m, int j) const { return comp_time_pmf[m][j]; }

    double comp_time_mean(int m, int j) const {
        double s = 0.0;
        for (std::size_t x = 0; x < comp_time_pmf[m][j].size(); ++x)
            s += static_cast<double>(x + 1) * comp_time_pmf[m][j][x];
        return s;
    }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Queue state of one (server, type) virtual machine: length and the
/// remaining computation slots of the head job.
/// Valid states are (0,0) and (L,eta) with L>=1, eta>=1.
struct QueueState {
    int length = 0;    // L in {0..l_max}
    int remaining = 0; // eta in {0..eta_max}

    bool operator==(const QueueState&) const = default;
};

/// Encoded index of a queue state: 0 for idle, eta + (L-1)*eta_max otherwise.
/// This is the row/column index of the queue transition matrix.
inline int queue_state_index(const QueueState& q, int eta_max) {
    return q.length == 0 ? 0 : q.remaining + (q.length - 1) * eta_max;
}

/// Inverse of queue_state_index.
inline QueueState queue_state_from_index(int idx, int eta_max) {
    if (idx == 0) return QueueState{0, 0};
    int l = (idx - 1) / eta_max + 1;
    int eta = idx - (l - 1) * eta_max;
    return QueueState{l, eta};
}

inline int queue_space_dim(int l_max, int eta_max) { return l_max * eta_max + 1; }

/// Per-type slice of the system state: in-flight counts for every (AP, server)
/// pair plus the queue state at every server. Dynamics of one type never read
/// another type's slice.
struct TypeState {
    int num_aps = 0;
    int num_servers = 0;
    std::vector<int> in_flight;     // [k*M + m]
    std::vector<QueueState> queues; // [m]

    TypeState() = default;
    TypeState(int K, int M)
        : num_aps(K), num_servers(M), in_flight(static_cast<std::size_t>(K) * M, 0), queues(M) {}

    int n(int k, int m) const { return in_flight[static_cast<std::size_t>(k) * num_servers + m]; }
    int& n(int k, int m) { return in_flight[static_cast<std::size_t>(k) * num_servers + m]; }
    const QueueState& q(int m) const { return queues[m]; }
    QueueState& q(int m) { return queues[m]; }

    bool operator==(const TypeState&) const = default;

    /// Compact byte key for hashing/memoization. Queue states use their
    /// encoded index, which needs two bytes once l_max*eta_max exceeds 255.
    std::vector<std::uint16_t> digest(int eta_max) const {
        std::vector<std::uint16_t> key;
        key.reserve(in_flight.size() + queues.size());
        for (int v : in_flight) key.push_back(static_cast<std::uint16_t>(v));
        for (const auto& qs : queues)
            key.push_back(static_cast<std::uint16_t>(queue_state_index(qs, eta_max)));
        return key;
    }
};

/// Full MDP state: one self-contained slice per job type.
struct SystemState {
    std::vector<TypeState> types; // [j]

    SystemState() = default;
    SystemState(int K, int M, int J) : types(J, TypeState(K, M)) {}

    int n(int k, int j, int m) const { return types[j].n(k, m); }
    int& n(int k, int j, int m) { return types[j].n(k, m); }
    const QueueState& q(int m, int j) const { return types[j].q(m); }
    QueueState& q(int m, int j) { return types[j].q(m); }

    bool operator==(const SystemState&) const = default;
};

/// Routing decision: route[k][j] is the destination server for a type-j job
/// arriving at AP k this slot.
struct DispatchAction {
    int num_aps = 0;
    int num_types = 0;
    std::vector<int> route; // [k*J + j]

    DispatchAction() = default;
    DispatchAction(int K, int J) : num_aps(K), num_types(J), route(static_cast<std::size_t>(K) * J, 0) {}

    int dest(int k, int j) const { return route[static_cast<std::size_t>(k) * num_types + j]; }
    int& dest(int k, int j) { return route[static_cast<std::size_t>(k) * num_types + j]; }

    bool operator==(const DispatchAction&) const = default;
};

/// Realized randomness and bookkeeping of one slot, for logging and
/// conservation checks.
struct SlotEvents {
    /// arrivals[k][j] in {0,1}
    std::vector<std::vector<int>> arrivals;
    /// upload_completions[j][k*M+m]: jobs whose upload finished this slot.
    std::vector<std::vector<int>> upload_completions;
    /// comp_redraws[j][m]: newly drawn head-of-line computation time, or 0
    /// when no job started service this slot.
    std::vector<std::vector<int>> comp_redraws;
    /// overflow_drops[j][m]: arrivals discarded because the queue was full.
    std::vector<std::vector<int>> overflow_drops;
    /// inflight_drops[j][k*M+m]: dispatched arrivals discarded at the
    /// in-flight cap (the clamp in the N dynamics).
    std::vector<std::vector<int>> inflight_drops;
    /// queue_departures[j][m] in {0,1}: head job finished computation.
    std::vector<std::vector<int>> queue_departures;

    int total_arrivals() const {
        int s = 0;
        for (const auto& row : arrivals)
            for (int v : row) s += v;
        return s;
    }
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

} // namespace edgedispatch
