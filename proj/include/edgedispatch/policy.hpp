// Dispatching policies: the fixed baseline, the four benchmark heuristics,
// and the proposed one-step policy improvement over the baseline value
// function.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "edgedispatch/model.hpp"
#include "edgedispatch/valuefn.hpp"

namespace edgedispatch {

enum class PolicyType { baseline, sqf, suf, scf, random, proposed };

enum class ExpectationMode { exact, certainty_equivalent };

const char* to_string(PolicyType t);
std::optional<PolicyType> policy_type_from_string(const std::string& s);

struct PolicyKind {
    PolicyType type = PolicyType::baseline;
    ExpectationMode expectation_mode = ExpectationMode::exact;
    std::size_t enumeration_cap = 100'000;
};

/// Diagnostic trace of one per-type improvement pass.
struct QFactorReport {
    struct Step {
        int ap = 0;
        std::vector<double> scores; // one per candidate server
        int chosen = 0;
        bool ce_fallback = false;
    };
    std::vector<Step> steps;
    double initial_value = 0.0;       // X on entry: W_j of the current state
    std::vector<double> step_minima;  // Y_l per coordinate pass
    std::vector<int> chosen_routes;   // final per-AP routes
};

/// A configured policy. decide() is a pure function of the state for every
/// deterministic kind; the random kind draws from the policy stream.
/// Safe for concurrent decide() calls: internal memoization is guarded.
class PolicyEngine {
public:
    /// tables is required for baseline and proposed kinds and ignored
    /// otherwise.
    PolicyEngine(PolicyKind kind, const SystemConfig& config,
                 std::shared_ptr<const ValueTables> tables);

    const PolicyKind& kind() const { return kind_; }

    DispatchAction decide(const SystemState& state, TrajectoryRng& rng) const;

    /// Algorithm-1 coordinate pass for one type: starting from the baseline
    /// routes, each AP in turn picks the server minimizing the one-step
    /// cost-to-go estimate, holding the other APs fixed. Exactly one pass.
    std::vector<int> improve_type(int j, const TypeState& state, QFactorReport* report = nullptr) const;

    /// Expected W_j of the successor state under the given per-AP routing.
    /// Exact mode enumerates per-server joint distributions (falling back to
    /// the certainty-equivalent evaluation for any server whose enumeration
    /// exceeds the cap); certainty-equivalent mode replaces the successor
    /// feeder counts inside the queue-cost arrival profile by their one-step
    /// expected distribution while keeping the queue branching exact.
    double expected_w_next(int j, const TypeState& state, const std::vector<int>& routes,
                           ExpectationMode mode, bool* ce_fallback = nullptr) const;

    /// Number of decide() calls answered from the decision memo.
    long memo_hits() const { return memo_hits_.load(); }
    long ce_fallbacks() const { return ce_fallbacks_.load(); }

private:
    double expected_d_es_server(int j, const TypeState& state, const std::vector<int>& routes, int m,
                                ExpectationMode mode, bool* ce_fallback) const;

    PolicyKind kind_;
    SystemConfig config_;
    std::shared_ptr<const ValueTables> tables_;
    std::vector<int> static_routes_; // suf/scf/baseline: [k*J + j]

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
    mutable std::unordered_map<std::vector<std::uint16_t>, std::vector<int>, KeyHash> decision_memo_;
    mutable std::shared_mutex memo_mutex_;
    mutable std::atomic<long> memo_hits_{0};
    mutable std::atomic<long> ce_fallbacks_{0};
    static constexpr std::size_t kMemoCapacity = 1u << 22;
};

} // namespace edgedispatch
