#include "edgedispatch/policy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace edgedispatch {

namespace {

constexpr double kTieTolerance = 1e-12;

/// PMF of Binomial(n, p) over {0..n}.
std::vector<double> binomial_pmf(int n, double p) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    pmf[0] = 1.0;
    for (int i = 1; i <= n; ++i)
        for (int d = i; d >= 0; --d)
            pmf[d] = (d > 0 ? pmf[d - 1] * p : 0.0) + pmf[d] * (1.0 - p);
    return pmf;
}

/// Expected y-value after one queue transition from q with `arrivals` jobs
/// joining: deterministic update plus the head-time redraw branch.
double queue_step_expect(const Eigen::VectorXd& y, const QueueState& q, int arrivals,
                         const CompTimePmf& f, int l_max, int eta_max) {
    QueueUpdate u = queue_update(q, arrivals, l_max);
    if (!u.needs_redraw)
        return y(queue_state_index(QueueState{u.next_length, u.next_remaining}, eta_max));
    double acc = 0.0;
    for (int b = 1; b <= eta_max; ++b)
        if (f[b - 1] != 0.0)
            acc += f[b - 1] * y(queue_state_index(QueueState{u.next_length, b}, eta_max));
    return acc;
}

} // namespace

const char* to_string(PolicyType t) {
    switch (t) {
        case PolicyType::baseline: return "baseline";
        case PolicyType::sqf: return "sqf";
        case PolicyType::suf: return "suf";
        case PolicyType::scf: return "scf";
        case PolicyType::random: return "random";
        case PolicyType::proposed: return "proposed";
    }
    return "?";
}

std::optional<PolicyType> policy_type_from_string(const std::string& s) {
    if (s == "baseline") return PolicyType::baseline;
    if (s == "sqf") return PolicyType::sqf;
    if (s == "suf") return PolicyType::suf;
    if (s == "scf") return PolicyType::scf;
    if (s == "random") return PolicyType::random;
    if (s == "proposed") return PolicyType::proposed;
    return std::nullopt;
}

PolicyEngine::PolicyEngine(PolicyKind kind, const SystemConfig& config,
                           std::shared_ptr<const ValueTables> tables)
    : kind_(kind), config_(config), tables_(std::move(tables)) {
    config_.validate();
    const int K = config_.num_aps;
    const int J = config_.num_types;

    switch (kind_.type) {
        case PolicyType::baseline:
        case PolicyType::proposed: {
            require(tables_ != nullptr, "baseline/proposed policies need value tables");
            static_routes_ = tables_->baseline().route;
            break;
        }
        case PolicyType::suf: {
            BaselinePolicy b = baseline_suf(config_);
            static_routes_ = b.route;
            break;
        }
        case PolicyType::scf: {
            BaselinePolicy b = baseline_scf(config_);
            static_routes_ = b.route;
            break;
        }
        case PolicyType::sqf:
        case PolicyType::random:
            static_routes_.assign(static_cast<std::size_t>(K) * J, 0);
            break;
    }
}

DispatchAction PolicyEngine::decide(const SystemState& state, TrajectoryRng& rng) const {
    const int K = config_.num_aps;
    const int M = config_.num_servers;
    const int J = config_.num_types;
    DispatchAction action(K, J);

    switch (kind_.type) {
        case PolicyType::baseline:
        case PolicyType::suf:
        case PolicyType::scf:
            action.route = static_routes_;
            return action;

        case PolicyType::sqf:
            for (int j = 0; j < J; ++j) {
                int best = 0;
                for (int m = 1; m < M; ++m)
                    if (state.q(m, j).length < state.q(best, j).length) best = m;
                for (int k = 0; k < K; ++k) action.dest(k, j) = best;
            }
            return action;

        case PolicyType::random:
            for (int k = 0; k < K; ++k)
                for (int j = 0; j < J; ++j) action.dest(k, j) = rng.policy.next_index(M);
            return action;

        case PolicyType::proposed:
            break;
    }

    for (int j = 0; j < J; ++j) {
        const TypeState& ts = state.types[j];
        std::vector<std::uint16_t> key = ts.digest(config_.eta_max);
        key.push_back(static_cast<std::uint16_t>(j));

        {
            std::shared_lock lock(memo_mutex_);
            auto it = decision_memo_.find(key);
            if (it != decision_memo_.end()) {
                memo_hits_.fetch_add(1, std::memory_order_relaxed);
                for (int k = 0; k < K; ++k) action.dest(k, j) = it->second[k];
                continue;
            }
        }

        std::vector<int> routes = improve_type(j, ts);
        for (int k = 0; k < K; ++k) action.dest(k, j) = routes[k];

        std::unique_lock lock(memo_mutex_);
        if (decision_memo_.size() < kMemoCapacity) decision_memo_.emplace(std::move(key), std::move(routes));
    }
    return action;
}

std::vector<int> PolicyEngine::improve_type(int j, const TypeState& state, QFactorReport* report) const {
    require(kind_.type == PolicyType::proposed, "improve_type is only defined for the proposed policy");
    const int K = config_.num_aps;
    const int M = config_.num_servers;

    std::vector<int> routes(K);
    for (int k = 0; k < K; ++k) routes[k] = tables_->baseline().dest(k, j);

    const double g_now = stage_cost_type(config_, state);
    const double gamma = config_.discount;

    double running_min = std::numeric_limits<double>::infinity();
    if (report) {
        report->steps.clear();
        report->step_minima.clear();
        report->initial_value = tables_->w_j(j, state);
        running_min = report->initial_value;
    }

    for (int ap = 0; ap < K; ++ap) {
        const int incumbent = routes[ap];
        std::vector<double> scores(M);
        bool fallback = false;
        for (int m = 0; m < M; ++m) {
            routes[ap] = m;
            bool ce = false;
            scores[m] = g_now + gamma * expected_w_next(j, state, routes, kind_.expectation_mode, &ce);
            fallback = fallback || ce;
        }

        double best = *std::min_element(scores.begin(), scores.end());
        int chosen;
        if (scores[incumbent] <= best + kTieTolerance) {
            chosen = incumbent;
        } else {
            chosen = 0;
            while (scores[chosen] > best + kTieTolerance) ++chosen;
        }
        routes[ap] = chosen;

        if (report) {
            report->steps.push_back({ap, scores, chosen, fallback});
            report->step_minima.push_back(scores[chosen]);
            running_min = std::min(running_min, scores[chosen]);
        }
    }

    if (report) report->chosen_routes = routes;
    return routes;
}

double PolicyEngine::expected_w_next(int j, const TypeState& state, const std::vector<int>& routes,
                                     ExpectationMode mode, bool* ce_fallback) const {
    const int K = config_.num_aps;
    const int M = config_.num_servers;
    if (ce_fallback) *ce_fallback = false;

    double expected = 0.0;

    // Upload part: W_j is additive in the per-(k,m) chains, so only the
    // one-step marginal of each chain matters.
    for (int k = 0; k < K; ++k) {
        const double lambda = config_.arrival(k, j);
        for (int m = 0; m < M; ++m) {
            const int n0 = state.n(k, m);
            const double u = 1.0 / config_.upload_mean(k, j, m);
            const double lr = (routes[k] == m) ? lambda : 0.0;
            const auto& table = tables_->d_ap_table(k, j, m);
            const auto dpmf = binomial_pmf(n0, u);
            for (int a = 0; a <= 1; ++a) {
                const double pa = (a == 1) ? lr : 1.0 - lr;
                if (pa == 0.0) continue;
                for (int d = 0; d <= n0; ++d)
                    expected += pa * dpmf[d] * table(std::min(n0 + a - d, config_.n_max));
            }
        }
    }

    bool any_fallback = false;
    for (int m = 0; m < M; ++m) {
        bool ce = false;
        expected += expected_d_es_server(j, state, routes, m, mode, &ce);
        any_fallback = any_fallback || ce;
    }
    if (any_fallback) {
        ce_fallbacks_.fetch_add(1, std::memory_order_relaxed);
        if (ce_fallback) *ce_fallback = true;
    }
    return expected;
}

double PolicyEngine::expected_d_es_server(int j, const TypeState& state, const std::vector<int>& routes,
                                          int m, ExpectationMode mode, bool* ce_fallback) const {
    const int K = config_.num_aps;
    const auto& feeders = tables_->feeders(j, m);
    const auto& f = config_.pmf(m, j);
    const QueueState& q = state.q(m);

    // Distribution of upload completions arriving at this queue from the
    // non-feeder chains; feeder completions are handled jointly with the
    // successor digest below.
    std::vector<bool> is_feeder(K, false);
    for (int k : feeders) is_feeder[k] = true;

    std::vector<double> sigma_nf{1.0};
    for (int k = 0; k < K; ++k) {
        if (is_feeder[k]) continue;
        const int n0 = state.n(k, m);
        if (n0 == 0) continue;
        const auto dpmf = binomial_pmf(n0, 1.0 / config_.upload_mean(k, j, m));
        std::vector<double> merged(sigma_nf.size() + n0, 0.0);
        for (std::size_t s = 0; s < sigma_nf.size(); ++s)
            for (int d = 0; d <= n0; ++d) merged[s + d] += sigma_nf[s] * dpmf[d];
        sigma_nf = std::move(merged);
    }

    bool use_exact = mode == ExpectationMode::exact;
    if (use_exact) {
        // Joint support: per feeder, completions x (arrival branch when this
        // slot's arrival is routed to the feeder chain), times the non-feeder
        // arrival-count support.
        std::size_t support = sigma_nf.size();
        for (int k : feeders) {
            support *= static_cast<std::size_t>(state.n(k, m)) + 1;
            if (routes[k] == m && config_.arrival(k, j) > 0.0) support *= 2;
            if (support > kind_.enumeration_cap) break;
        }
        if (support > kind_.enumeration_cap) {
            use_exact = false;
            if (ce_fallback) *ce_fallback = true;
        }
    }

    if (!use_exact) {
        std::vector<std::pair<int, int>> feeder_key;
        feeder_key.reserve(feeders.size());
        for (int k : feeders) feeder_key.emplace_back(state.n(k, m), routes[k] == m ? 1 : 0);
        const Eigen::VectorXd& y = tables_->es_vector_marginal(j, m, feeder_key);

        // Queue branching stays exact: convolve the feeder completions into
        // the non-feeder arrival count.
        std::vector<double> sigma = sigma_nf;
        for (int k : feeders) {
            const int n0 = state.n(k, m);
            if (n0 == 0) continue;
            const auto dpmf = binomial_pmf(n0, 1.0 / config_.upload_mean(k, j, m));
            std::vector<double> merged(sigma.size() + n0, 0.0);
            for (std::size_t s = 0; s < sigma.size(); ++s)
                for (int d = 0; d <= n0; ++d) merged[s + d] += sigma[s] * dpmf[d];
            sigma = std::move(merged);
        }

        double acc = 0.0;
        for (std::size_t s = 0; s < sigma.size(); ++s)
            if (sigma[s] != 0.0)
                acc += sigma[s] *
                       queue_step_expect(y, q, static_cast<int>(s), f, config_.l_max, config_.eta_max);
        return acc;
    }

    // Exact joint over the feeders: weighted leaves of (successor feeder
    // counts, feeder completion total).
    struct Leaf {
        std::vector<int> succ_n;
        int sigma_f;
        double prob;
    };
    std::vector<Leaf> leaves;
    leaves.push_back({{}, 0, 1.0});
    for (int k : feeders) {
        const int n0 = state.n(k, m);
        const double lambda = (routes[k] == m) ? config_.arrival(k, j) : 0.0;
        const auto dpmf = binomial_pmf(n0, 1.0 / config_.upload_mean(k, j, m));
        std::vector<Leaf> grown;
        grown.reserve(leaves.size() * (static_cast<std::size_t>(n0) + 1) * 2);
        for (const auto& leaf : leaves)
            for (int a = 0; a <= 1; ++a) {
                const double pa = (a == 1) ? lambda : 1.0 - lambda;
                if (pa == 0.0) continue;
                for (int d = 0; d <= n0; ++d) {
                    if (dpmf[d] == 0.0) continue;
                    Leaf next = leaf;
                    next.succ_n.push_back(std::min(n0 + a - d, config_.n_max));
                    next.sigma_f += d;
                    next.prob *= pa * dpmf[d];
                    grown.push_back(std::move(next));
                }
            }
        leaves = std::move(grown);
    }

    double acc = 0.0;
    for (const auto& leaf : leaves) {
        const Eigen::VectorXd& y = tables_->es_vector(j, m, leaf.succ_n);
        double inner = 0.0;
        for (std::size_t s = 0; s < sigma_nf.size(); ++s)
            if (sigma_nf[s] != 0.0)
                inner += sigma_nf[s] * queue_step_expect(y, q, leaf.sigma_f + static_cast<int>(s), f,
                                                         config_.l_max, config_.eta_max);
        acc += leaf.prob * inner;
    }
    return acc;
}

} // namespace edgedispatch
