#include "edgedispatch/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <unordered_map>

namespace edgedispatch {

bool state_valid(const SystemConfig& config, const SystemState& state) {
    if (static_cast<int>(state.types.size()) != config.num_types) return false;
    for (const auto& ts : state.types) {
        if (ts.num_aps != config.num_aps || ts.num_servers != config.num_servers) return false;
        for (int v : ts.in_flight)
            if (v < 0 || v > config.n_max) return false;
        for (const auto& q : ts.queues) {
            if (q.length < 0 || q.length > config.l_max) return false;
            if (q.remaining < 0 || q.remaining > config.eta_max) return false;
            if (q.length == 0 && q.remaining != 0) return false;
            if (q.length > 0 && q.remaining < 1) return false;
        }
    }
    return true;
}

bool action_valid(const SystemConfig& config, const DispatchAction& action) {
    if (action.num_aps != config.num_aps || action.num_types != config.num_types) return false;
    for (int m : action.route)
        if (m < 0 || m >= config.num_servers) return false;
    return true;
}

QueueUpdate queue_update(const QueueState& q, int queue_arrivals, int l_max) {
    QueueUpdate u;
    u.departed = (q.remaining == 1) ? 1 : 0;
    int raw = q.length - u.departed + queue_arrivals;
    u.next_length = std::min(raw, l_max);
    u.overflow = raw - u.next_length;
    if (q.remaining > 1) {
        u.next_remaining = q.remaining - 1;
        u.needs_redraw = false;
    } else if (u.next_length == 0) {
        u.next_remaining = 0;
        u.needs_redraw = false;
    } else {
        // eta <= 1 and the post-departure queue is nonempty: a job starts
        // service and its computation time is drawn from the PMF.
        u.needs_redraw = true;
    }
    return u;
}

std::pair<SystemState, SlotEvents> step(const SystemConfig& config, const SystemState& state,
                                        const DispatchAction& action, TrajectoryRng& rng) {
    assert(state_valid(config, state));
    assert(action_valid(config, action));

    const int K = config.num_aps;
    const int M = config.num_servers;
    const int J = config.num_types;

    SlotEvents ev;
    ev.arrivals.assign(K, std::vector<int>(J, 0));
    ev.upload_completions.assign(J, std::vector<int>(static_cast<std::size_t>(K) * M, 0));
    ev.comp_redraws.assign(J, std::vector<int>(M, 0));
    ev.overflow_drops.assign(J, std::vector<int>(M, 0));
    ev.inflight_drops.assign(J, std::vector<int>(static_cast<std::size_t>(K) * M, 0));
    ev.queue_departures.assign(J, std::vector<int>(M, 0));

    // Stream consumption is fixed per slot regardless of the state so that
    // trajectories under different policies share the same raw randomness.
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j)
            ev.arrivals[k][j] = rng.arrivals.next_bernoulli(config.arrival(k, j)) ? 1 : 0;

    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j)
            for (int m = 0; m < M; ++m) {
                int n = state.n(k, j, m);
                ev.upload_completions[j][static_cast<std::size_t>(k) * M + m] =
                    rng.uploads.next_binomial(n, 1.0 / config.upload_mean(k, j, m), config.n_max);
            }

    SystemState next(K, M, J);
    for (int j = 0; j < J; ++j) {
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                const std::size_t km = static_cast<std::size_t>(k) * M + m;
                int routed = (action.dest(k, j) == m) ? ev.arrivals[k][j] : 0;
                int raw = state.n(k, j, m) + routed - ev.upload_completions[j][km];
                int clamped = std::min(raw, config.n_max);
                ev.inflight_drops[j][km] = raw - clamped;
                next.n(k, j, m) = clamped;
            }

        for (int m = 0; m < M; ++m) {
            int queue_arrivals = 0;
            for (int k = 0; k < K; ++k)
                queue_arrivals += ev.upload_completions[j][static_cast<std::size_t>(k) * M + m];

            QueueUpdate u = queue_update(state.q(m, j), queue_arrivals, config.l_max);
            ev.overflow_drops[j][m] = u.overflow;
            ev.queue_departures[j][m] = u.departed;

            int draw = rng.computation.next_pmf(config.pmf(m, j));
            QueueState nq;
            nq.length = u.next_length;
            if (u.needs_redraw) {
                nq.remaining = draw;
                ev.comp_redraws[j][m] = draw;
            } else {
                nq.remaining = u.next_remaining;
            }
            next.q(m, j) = nq;
        }
    }

    assert(state_valid(config, next));
    return {std::move(next), std::move(ev)};
}

double stage_cost_type(const SystemConfig& config, const TypeState& state) {
    double cost = 0.0;
    for (int v : state.in_flight) cost += v;
    for (const auto& q : state.queues) {
        cost += q.length;
        if (q.length == config.l_max) cost += config.overflow_weight;
    }
    return cost;
}

double stage_cost(const SystemConfig& config, const SystemState& state) {
    double cost = 0.0;
    for (const auto& ts : state.types) cost += stage_cost_type(config, ts);
    return cost;
}

namespace {

/// Binomial(n, p) PMF table over {0..n}.
std::vector<double> binomial_pmf(int n, double p) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    pmf[0] = 1.0;
    // Iterative Pascal update keeps the table exact for small n.
    for (int i = 1; i <= n; ++i)
        for (int d = i; d >= 0; --d)
            pmf[d] = (d > 0 ? pmf[d - 1] * p : 0.0) + pmf[d] * (1.0 - p);
    return pmf;
}

struct VecU16Hash {
    std::size_t operator()(const std::vector<std::uint16_t>& v) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::uint16_t x : v) {
            h ^= x;
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

} // namespace

std::size_t enumeration_support_bound(const SystemConfig& config, int type, const TypeState& state) {
    (void)type;
    std::size_t bound = 1;
    const std::size_t cap = 1ULL << 62;
    for (int v : state.in_flight) {
        bound *= static_cast<std::size_t>(v) + 1;
        if (bound > cap / 4) return cap;
    }
    for (int k = 0; k < state.num_aps; ++k) {
        bound *= 2;
        if (bound > cap / 4) return cap;
    }
    for (int m = 0; m < state.num_servers; ++m) {
        bound *= static_cast<std::size_t>(config.eta_max);
        if (bound > cap / 4) return cap;
    }
    return bound;
}

std::vector<TypeTransition> next_state_distribution_type(const SystemConfig& config, int type,
                                                         const TypeState& state,
                                                         const std::vector<int>& routes_per_ap,
                                                         std::size_t max_support) {
    const int K = state.num_aps;
    const int M = state.num_servers;
    require(static_cast<int>(routes_per_ap.size()) == K, "routes_per_ap must have one entry per AP");

    std::size_t bound = enumeration_support_bound(config, type, state);
    if (bound > max_support) throw EnumerationTooLarge(bound);

    // Weighted partial realizations of (A_k, D_{k,m} for all k,m).
    struct Partial {
        std::vector<int> completions; // [k*M+m]
        std::vector<int> arrivals;    // [k]
        double prob;
    };

    std::vector<Partial> partials;
    partials.push_back(
        {std::vector<int>(static_cast<std::size_t>(K) * M, 0), std::vector<int>(K, 0), 1.0});

    for (int k = 0; k < K; ++k) {
        // Arrival branch.
        const double lambda = config.arrival(k, type);
        std::vector<Partial> grown;
        grown.reserve(partials.size() * 2);
        for (const auto& p : partials) {
            if (lambda < 1.0) {
                Partial q = p;
                q.prob *= 1.0 - lambda;
                grown.push_back(std::move(q));
            }
            if (lambda > 0.0) {
                Partial q = p;
                q.arrivals[k] = 1;
                q.prob *= lambda;
                grown.push_back(std::move(q));
            }
        }
        partials = std::move(grown);

        // Completion branches per server.
        for (int m = 0; m < M; ++m) {
            const int n = state.n(k, m);
            if (n == 0) continue;
            const auto pmf = binomial_pmf(n, 1.0 / config.upload_mean(k, type, m));
            std::vector<Partial> next;
            next.reserve(partials.size() * pmf.size());
            for (const auto& p : partials)
                for (int d = 0; d <= n; ++d) {
                    if (pmf[d] == 0.0) continue;
                    Partial q = p;
                    q.completions[static_cast<std::size_t>(k) * M + m] = d;
                    q.prob *= pmf[d];
                    next.push_back(std::move(q));
                }
            partials = std::move(next);
        }
    }

    std::unordered_map<std::vector<std::uint16_t>, std::pair<TypeState, double>, VecU16Hash> acc;

    // For each realization, apply the deterministic updates and branch on the
    // head-time redraws.
    std::vector<TypeState> frontier;
    std::vector<double> frontier_prob;
    for (const auto& p : partials) {
        TypeState base(K, M);
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                const std::size_t km = static_cast<std::size_t>(k) * M + m;
                int routed = (routes_per_ap[k] == m) ? p.arrivals[k] : 0;
                base.n(k, m) = std::min(state.n(k, m) + routed - p.completions[km], config.n_max);
            }

        frontier.clear();
        frontier_prob.clear();
        frontier.push_back(base);
        frontier_prob.push_back(p.prob);

        for (int m = 0; m < M; ++m) {
            int queue_arrivals = 0;
            for (int k = 0; k < K; ++k)
                queue_arrivals += p.completions[static_cast<std::size_t>(k) * M + m];
            QueueUpdate u = queue_update(state.q(m), queue_arrivals, config.l_max);

            if (!u.needs_redraw) {
                for (auto& ts : frontier) ts.q(m) = QueueState{u.next_length, u.next_remaining};
                continue;
            }
            const auto& f = config.pmf(m, type);
            std::vector<TypeState> grown;
            std::vector<double> grown_prob;
            grown.reserve(frontier.size() * f.size());
            grown_prob.reserve(frontier.size() * f.size());
            for (std::size_t i = 0; i < frontier.size(); ++i)
                for (std::size_t b = 0; b < f.size(); ++b) {
                    if (f[b] == 0.0) continue;
                    TypeState ts = frontier[i];
                    ts.q(m) = QueueState{u.next_length, static_cast<int>(b) + 1};
                    grown.push_back(std::move(ts));
                    grown_prob.push_back(frontier_prob[i] * f[b]);
                }
            frontier = std::move(grown);
            frontier_prob = std::move(grown_prob);
        }

        for (std::size_t i = 0; i < frontier.size(); ++i) {
            auto key = frontier[i].digest(config.eta_max);
            auto it = acc.find(key);
            if (it == acc.end())
                acc.emplace(std::move(key), std::make_pair(frontier[i], frontier_prob[i]));
            else
                it->second.second += frontier_prob[i];
        }
    }

    std::vector<TypeTransition> out;
    out.reserve(acc.size());
    for (auto& [key, sp] : acc) out.push_back({std::move(sp.first), sp.second});
    return out;
}

} // namespace edgedispatch
