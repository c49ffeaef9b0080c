#include "edgedispatch/oracle.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <thread>

#include "edgedispatch/markov.hpp"

namespace edgedispatch {

namespace {

std::vector<std::uint16_t> state_key(const SystemState& s, int eta_max) {
    std::vector<std::uint16_t> key;
    for (const auto& ts : s.types) {
        auto part = ts.digest(eta_max);
        key.insert(key.end(), part.begin(), part.end());
    }
    return key;
}

/// All valid queue states in encoded-index order.
std::vector<QueueState> queue_states(int l_max, int eta_max) {
    std::vector<QueueState> out;
    out.reserve(queue_space_dim(l_max, eta_max));
    for (int i = 0; i < queue_space_dim(l_max, eta_max); ++i)
        out.push_back(queue_state_from_index(i, eta_max));
    return out;
}

} // namespace

double exact_state_count(const SystemConfig& config) {
    double chains = static_cast<double>(config.num_aps) * config.num_servers * config.num_types;
    double queues = static_cast<double>(config.num_servers) * config.num_types;
    return std::pow(config.n_max + 1.0, chains) *
           std::pow(static_cast<double>(queue_space_dim(config.l_max, config.eta_max)), queues);
}

double max_stage_cost(const SystemConfig& config) {
    return config.num_types *
           (static_cast<double>(config.num_aps) * config.num_servers * config.n_max +
            config.num_servers * (config.l_max + config.overflow_weight));
}

int EnumeratedMdp::state_index(const SystemState& s) const {
    auto it = index_.find(state_key(s, config.eta_max));
    require(it != index_.end(), "state not part of the enumerated space");
    return it->second;
}

int EnumeratedMdp::action_index(const DispatchAction& a) const {
    // Actions are enumerated lexicographically in route order.
    long idx = 0;
    for (int v : a.route) idx = idx * config.num_servers + v;
    return static_cast<int>(idx);
}

EnumeratedMdp enumerate_mdp(const SystemConfig& config, std::size_t max_states,
                            std::size_t max_actions) {
    config.validate();
    const int K = config.num_aps;
    const int M = config.num_servers;
    const int J = config.num_types;

    const double count = exact_state_count(config);
    if (count > static_cast<double>(max_states)) throw StateSpaceTooLarge(count);
    const double action_count = std::pow(static_cast<double>(M), static_cast<double>(K) * J);
    if (action_count > static_cast<double>(max_actions)) throw StateSpaceTooLarge(action_count);

    EnumeratedMdp mdp;
    mdp.config = config;

    // Enumerate states: all in-flight combinations times all queue states.
    const auto qstates = queue_states(config.l_max, config.eta_max);
    const std::size_t chains = static_cast<std::size_t>(K) * M * J;
    const std::size_t queues = static_cast<std::size_t>(M) * J;

    std::vector<int> n_digits(chains, 0);
    std::vector<std::size_t> q_digits(queues, 0);
    while (true) {
        SystemState s(K, M, J);
        {
            std::size_t c = 0;
            for (int k = 0; k < K; ++k)
                for (int j = 0; j < J; ++j)
                    for (int m = 0; m < M; ++m) s.n(k, j, m) = n_digits[c++];
            std::size_t qd = 0;
            for (int m = 0; m < M; ++m)
                for (int j = 0; j < J; ++j) s.q(m, j) = qstates[q_digits[qd++]];
        }
        mdp.index_.emplace(state_key(s, config.eta_max), static_cast<int>(mdp.states.size()));
        mdp.states.push_back(std::move(s));

        // Odometer increment over (n_digits, q_digits).
        std::size_t pos = 0;
        bool carried = true;
        for (pos = 0; pos < chains && carried; ++pos) {
            if (++n_digits[pos] <= config.n_max) {
                carried = false;
            } else {
                n_digits[pos] = 0;
            }
        }
        for (pos = 0; pos < queues && carried; ++pos) {
            if (++q_digits[pos] < qstates.size()) {
                carried = false;
            } else {
                q_digits[pos] = 0;
            }
        }
        if (carried) break;
    }

    // Enumerate actions lexicographically so action_index() can recompute the
    // position arithmetically.
    const std::size_t route_slots = static_cast<std::size_t>(K) * J;
    std::vector<int> digits(route_slots, 0);
    while (true) {
        DispatchAction a(K, J);
        a.route = digits;
        mdp.actions.push_back(std::move(a));
        std::size_t pos = route_slots;
        while (pos > 0) {
            --pos;
            if (++digits[pos] < M) break;
            digits[pos] = 0;
            if (pos == 0) {
                digits.clear();
                break;
            }
        }
        if (digits.empty()) break;
    }

    mdp.stage_costs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) mdp.stage_costs(s) = stage_cost(config, mdp.states[s]);

    // Transitions: per-type successor distributions composed across types.
    mdp.transitions.assign(mdp.num_states(), {});
    for (int s = 0; s < mdp.num_states(); ++s) {
        mdp.transitions[s].resize(mdp.num_actions());
        for (int a = 0; a < mdp.num_actions(); ++a) {
            const auto& action = mdp.actions[a];

            std::vector<std::pair<SystemState, double>> combined;
            combined.emplace_back(SystemState(K, M, J), 1.0);
            for (int j = 0; j < J; ++j) {
                std::vector<int> routes(K);
                for (int k = 0; k < K; ++k) routes[k] = action.dest(k, j);
                auto per_type =
                    next_state_distribution_type(config, j, mdp.states[s].types[j], routes);
                std::vector<std::pair<SystemState, double>> grown;
                grown.reserve(combined.size() * per_type.size());
                for (const auto& [partial, pp] : combined)
                    for (const auto& tt : per_type) {
                        SystemState next = partial;
                        next.types[j] = tt.state;
                        grown.emplace_back(std::move(next), pp * tt.probability);
                    }
                combined = std::move(grown);
            }

            std::unordered_map<int, double> acc;
            for (const auto& [ns, p] : combined) acc[mdp.state_index(ns)] += p;
            auto& row = mdp.transitions[s][a];
            row.assign(acc.begin(), acc.end());
            std::sort(row.begin(), row.end());
        }
    }
    return mdp;
}

ValueIterationResult value_iteration(const EnumeratedMdp& mdp, double gamma, double eps_vi) {
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    const int n = mdp.num_states();
    const double threshold = eps_vi * (1.0 - gamma) / (2.0 * gamma);

    ValueIterationResult res;
    res.values = Eigen::VectorXd::Zero(n);
    res.greedy_actions.assign(n, 0);
    Eigen::VectorXd next(n);

    const long max_sweeps = 1'000'000;
    for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.num_actions(); ++a) {
                double q = 0.0;
                for (const auto& [ns, p] : mdp.transitions[s][a]) q += p * res.values(ns);
                q = mdp.stage_costs(s) + gamma * q;
                if (q < best) {
                    best = q;
                    best_a = a;
                }
            }
            next(s) = best;
            res.greedy_actions[s] = best_a;
            change = std::max(change, std::abs(best - res.values(s)));
        }
        res.values = next;
        res.sweeps = static_cast<int>(sweep);
        if (change < threshold) break;
    }
    res.final_residual = bellman_residual(mdp, gamma, res.values);
    return res;
}

double bellman_residual(const EnumeratedMdp& mdp, double gamma, const Eigen::VectorXd& values) {
    double worst = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.num_actions(); ++a) {
            double q = 0.0;
            for (const auto& [ns, p] : mdp.transitions[s][a]) q += p * values(ns);
            best = std::min(best, mdp.stage_costs(s) + gamma * q);
        }
        worst = std::max(worst, std::abs(best - values(s)));
    }
    return worst;
}

Eigen::VectorXd policy_evaluation_exact(const EnumeratedMdp& mdp, double gamma,
                                        const std::vector<int>& action_per_state) {
    const int n = mdp.num_states();
    require(static_cast<int>(action_per_state.size()) == n, "one action per state required");
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < n; ++s)
        for (const auto& [ns, p] : mdp.transitions[s][action_per_state[s]]) a(s, ns) -= gamma * p;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd v = lu.solve(mdp.stage_costs);
    double residual = (a * v - mdp.stage_costs).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-8 * std::max(1.0, mdp.stage_costs.maxCoeff())))
        throw std::runtime_error("policy evaluation solve failed");
    return v;
}

std::vector<int> policy_action_table(const EnumeratedMdp& mdp, const PolicyEngine& policy) {
    require(policy.kind().type != PolicyType::random,
            "the random policy has no deterministic action table");
    TrajectoryRng rng(0, 0); // never consumed by deterministic kinds
    std::vector<int> table(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s)
        table[s] = mdp.action_index(policy.decide(mdp.states[s], rng));
    return table;
}

Eigen::VectorXd random_policy_evaluation_exact(const EnumeratedMdp& mdp, double gamma) {
    const int n = mdp.num_states();
    const double w = 1.0 / mdp.num_actions();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < n; ++s)
        for (int act = 0; act < mdp.num_actions(); ++act)
            for (const auto& [ns, p] : mdp.transitions[s][act]) a(s, ns) -= gamma * w * p;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    return lu.solve(mdp.stage_costs);
}

McEstimate policy_evaluation_mc(const SystemConfig& config, const PolicyEngine& policy,
                                const SystemState& start, long replications, std::uint64_t seed,
                                double tail_eps, int num_threads) {
    const double gamma = config.discount;
    const int horizon = truncation_horizon(gamma, max_stage_cost(config), tail_eps);

    std::vector<double> totals(static_cast<std::size_t>(replications), 0.0);
    auto worker = [&](long begin, long end) {
        for (long r = begin; r < end; ++r) {
            TrajectoryRng rng(seed, static_cast<std::uint64_t>(r));
            SystemState state = start;
            double total = 0.0;
            double weight = 1.0;
            for (int t = 1; t <= horizon; ++t) {
                total += weight * stage_cost(config, state);
                weight *= gamma;
                DispatchAction action = policy.decide(state, rng);
                state = step(config, state, action, rng).first;
            }
            totals[static_cast<std::size_t>(r)] = total;
        }
    };

    if (num_threads <= 1) {
        worker(0, replications);
    } else {
        std::vector<std::thread> pool;
        long chunk = (replications + num_threads - 1) / num_threads;
        for (int i = 0; i < num_threads; ++i) {
            long begin = i * chunk;
            long end = std::min(replications, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    McEstimate est;
    est.replications = replications;
    est.horizon = horizon;
    double sum = 0.0;
    for (double v : totals) sum += v;
    est.mean = sum / static_cast<double>(replications);
    double ss = 0.0;
    for (double v : totals) ss += (v - est.mean) * (v - est.mean);
    est.std_error = replications > 1
                        ? std::sqrt(ss / (static_cast<double>(replications) - 1.0) /
                                    static_cast<double>(replications))
                        : 0.0;
    return est;
}

BoundReport check_bound(const EnumeratedMdp& mdp, const PolicyEngine& proposed,
                        const PolicyEngine& baseline, double tolerance) {
    const double gamma = mdp.config.discount;
    BoundReport rep;
    rep.v_star = value_iteration(mdp, gamma).values;
    rep.v_improved = policy_evaluation_exact(mdp, gamma, policy_action_table(mdp, proposed));
    rep.v_baseline = policy_evaluation_exact(mdp, gamma, policy_action_table(mdp, baseline));

    rep.min_improvement_margin = std::numeric_limits<double>::infinity();
    rep.min_optimality_margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < mdp.num_states(); ++s) {
        const double improvement = rep.v_baseline(s) - rep.v_improved(s);
        const double optimality = rep.v_improved(s) - rep.v_star(s);
        rep.min_improvement_margin = std::min(rep.min_improvement_margin, improvement);
        rep.min_optimality_margin = std::min(rep.min_optimality_margin, optimality);
        if (improvement < -tolerance || optimality < -tolerance) rep.violations.push_back(s);
    }
    rep.holds = rep.violations.empty();
    return rep;
}

} // namespace edgedispatch
