// Ground truth for tiny instances: the fully enumerated MDP, value iteration,
// exact and Monte-Carlo policy evaluation, and the performance-bound check
// V* <= V_improved <= V_baseline.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "edgedispatch/policy.hpp"

namespace edgedispatch {

struct StateSpaceTooLarge : std::runtime_error {
    explicit StateSpaceTooLarge(double count)
        : std::runtime_error("state space too large for exact enumeration: " +
                             std::to_string(count) + " states"),
          state_count(count) {}
    double state_count;
};

/// Fully enumerated finite MDP of a tiny configuration.
struct EnumeratedMdp {
    SystemConfig config;
    std::vector<SystemState> states;
    std::vector<DispatchAction> actions;
    /// transitions[s][a]: sparse successor distribution.
    std::vector<std::vector<std::vector<std::pair<int, double>>>> transitions;
    Eigen::VectorXd stage_costs;

    int num_states() const { return static_cast<int>(states.size()); }
    int num_actions() const { return static_cast<int>(actions.size()); }

    int state_index(const SystemState& s) const;
    int action_index(const DispatchAction& a) const;

private:
    friend EnumeratedMdp enumerate_mdp(const SystemConfig&, std::size_t, std::size_t);
    struct KeyHash {
        std::size_t operator()(const std::vector<std::uint16_t>& v) const {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (std::uint16_t x : v) {
                h ^= x;
                h *= 0x100000001b3ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_map<std::vector<std::uint16_t>, int, KeyHash> index_;
};

/// Number of states of the exact MDP: (n_max+1)^(K*M*J) * (l_max*eta_max+1)^(M*J).
double exact_state_count(const SystemConfig& config);

/// Build the exact MDP. Throws StateSpaceTooLarge beyond max_states or when
/// the action space exceeds max_actions.
EnumeratedMdp enumerate_mdp(const SystemConfig& config, std::size_t max_states = 1'000'000,
                            std::size_t max_actions = 65'536);

struct ValueIterationResult {
    Eigen::VectorXd values;
    std::vector<int> greedy_actions;
    double final_residual = 0.0;
    int sweeps = 0;
};

/// Standard value iteration; terminates when the sup-norm change drops below
/// eps_vi*(1-gamma)/(2*gamma), which leaves a Bellman residual well below
/// eps_vi on the returned values.
ValueIterationResult value_iteration(const EnumeratedMdp& mdp, double gamma, double eps_vi = 1e-6);

/// Sup-norm Bellman residual ||V - TV||_inf.
double bellman_residual(const EnumeratedMdp& mdp, double gamma, const Eigen::VectorXd& values);

/// Exact discounted value of a stationary policy given as a per-state action
/// choice; solves (I - gamma P_pi) V = g.
Eigen::VectorXd policy_evaluation_exact(const EnumeratedMdp& mdp, double gamma,
                                        const std::vector<int>& action_per_state);

/// Per-state action table induced by a policy engine. The random kind is
/// rejected here (it has no stationary deterministic action table).
std::vector<int> policy_action_table(const EnumeratedMdp& mdp, const PolicyEngine& policy);

/// Exact value of the uniformly random dispatcher (mixture over all actions).
Eigen::VectorXd random_policy_evaluation_exact(const EnumeratedMdp& mdp, double gamma);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long replications = 0;
    int horizon = 0;
};

/// Monte-Carlo discounted cost of a policy from a start state, truncated when
/// the tail bound gamma^t*g_max/(1-gamma) falls below tail_eps.
McEstimate policy_evaluation_mc(const SystemConfig& config, const PolicyEngine& policy,
                                const SystemState& start, long replications, std::uint64_t seed,
                                double tail_eps = 1e-6, int num_threads = 1);

struct BoundReport {
    Eigen::VectorXd v_star;
    Eigen::VectorXd v_improved;
    Eigen::VectorXd v_baseline;
    /// Per-state margins: improvement = V_baseline - V_improved,
    /// optimality = V_improved - V_star. Both must be >= -tolerance.
    double min_improvement_margin = 0.0;
    double min_optimality_margin = 0.0;
    std::vector<int> violations;
    bool holds = false;
};

/// Lemma-3 style check on a tiny instance: exact evaluations of the proposed
/// and baseline policies bracketed by the optimal values.
BoundReport check_bound(const EnumeratedMdp& mdp, const PolicyEngine& proposed,
                        const PolicyEngine& baseline, double tolerance = 1e-7);

/// Largest possible stage cost of a configuration.
double max_stage_cost(const SystemConfig& config);

} // namespace edgedispatch
