// Exact stochastic dynamics of the dispatching network and the per-slot cost.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "edgedispatch/rng.hpp"
#include "edgedispatch/types.hpp"

namespace edgedispatch {

/// Raised when an exact successor enumeration would exceed its support cap.
struct EnumerationTooLarge : std::runtime_error {
    explicit EnumerationTooLarge(std::size_t support)
        : std::runtime_error("successor enumeration too large: " + std::to_string(support) + " states"),
          support_size(support) {}
    std::size_t support_size;
};

/// Advance the system by one slot.
///
/// Per (k,j,m): upload completions D ~ Binomial(N, 1/U) are drawn against the
/// slot-start count, an arrival A ~ Bernoulli(lambda) joins the chain chosen
/// by the action, and N' = min(N + A - D, n_max). Per (m,j): the queue absorbs
/// the completions, the head job departs when eta == 1, and a new head time is
/// drawn from the computation PMF whenever eta <= 1 leaves a nonempty queue.
/// Jobs dispatched this slot never complete upload in the same slot.
std::pair<SystemState, SlotEvents> step(const SystemConfig& config, const SystemState& state,
                                        const DispatchAction& action, TrajectoryRng& rng);

/// Per-slot cost of one type slice: in-flight jobs plus queued jobs plus the
/// overflow penalty for each full queue.
double stage_cost_type(const SystemConfig& config, const TypeState& state);

/// Per-slot system cost: sum of stage_cost_type over types.
double stage_cost(const SystemConfig& config, const SystemState& state);

/// Deterministic part of the queue update: next queue state given the number
/// of jobs arriving at the queue this slot, before the head-time redraw.
/// Returns (next length, needs_redraw). When needs_redraw is false the next
/// remaining time is also returned; otherwise it must be drawn from the PMF.
struct QueueUpdate {
    int next_length = 0;
    int next_remaining = 0; // valid when !needs_redraw
    bool needs_redraw = false;
    int overflow = 0;
    int departed = 0;
};

QueueUpdate queue_update(const QueueState& q, int queue_arrivals, int l_max);

/// One weighted successor of a per-type state.
struct TypeTransition {
    TypeState state;
    double probability;
};

/// Exact distribution of the type-j successor state under the given per-AP
/// routing. Enumerates the product of the per-(k,m) binomial completion
/// supports, the per-AP Bernoulli arrivals, and the head-time redraw branches.
/// Probabilities sum to 1 within 1e-10. Throws EnumerationTooLarge when the
/// a-priori support bound exceeds max_support.
std::vector<TypeTransition> next_state_distribution_type(const SystemConfig& config, int type,
                                                         const TypeState& state,
                                                         const std::vector<int>& routes_per_ap,
                                                         std::size_t max_support = 2'000'000);

/// Upper bound on the enumeration support used by the cap check.
std::size_t enumeration_support_bound(const SystemConfig& config, int type, const TypeState& state);

/// Contract checks (used by assertions and tests).
bool state_valid(const SystemConfig& config, const SystemState& state);
bool action_valid(const SystemConfig& config, const DispatchAction& action);

} // namespace edgedispatch
