#include "edgedispatch/valuefn.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace edgedispatch {

namespace {

int argmin_index(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[i] < values[best]) best = i;
    return best;
}

QueueKernel::SparseRows sparsify(const StochasticMatrix& m) {
    QueueKernel::SparseRows rows(m.dim());
    for (int q = 0; q < m.dim(); ++q)
        for (int p = 0; p < m.dim(); ++p)
            if (m.entries(q, p) != 0.0) rows[q].emplace_back(p, m.entries(q, p));
    return rows;
}

} // namespace

BaselinePolicy baseline_scf(const SystemConfig& config) {
    BaselinePolicy b(config.num_aps, config.num_types);
    for (int j = 0; j < config.num_types; ++j) {
        std::vector<double> means(config.num_servers);
        for (int m = 0; m < config.num_servers; ++m) means[m] = config.comp_time_mean(m, j);
        int dest = argmin_index(means);
        for (int k = 0; k < config.num_aps; ++k) b.dest(k, j) = dest;
    }
    return b;
}

BaselinePolicy baseline_suf(const SystemConfig& config) {
    BaselinePolicy b(config.num_aps, config.num_types);
    for (int k = 0; k < config.num_aps; ++k)
        for (int j = 0; j < config.num_types; ++j) {
            std::vector<double> delays(config.num_servers);
            for (int m = 0; m < config.num_servers; ++m) delays[m] = config.upload_mean(k, j, m);
            b.dest(k, j) = argmin_index(delays);
        }
    return b;
}

void QueueKernel::apply(double alpha, const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
    out.setZero();
    if (alpha < 1.0) {
        const double w = 1.0 - alpha;
        for (int q = 0; q < dim; ++q) {
            double acc = 0.0;
            for (const auto& [p, v] : no_arrival[q]) acc += v * in(p);
            out(q) += w * acc;
        }
    }
    if (alpha > 0.0) {
        for (int q = 0; q < dim; ++q) {
            double acc = 0.0;
            for (const auto& [p, v] : one_arrival[q]) acc += v * in(p);
            out(q) += alpha * acc;
        }
    }
}

ValueTables::ValueTables(const SystemConfig& config, const BaselinePolicy& baseline, DesForm des_form,
                         double eps_trunc)
    : config_(config), baseline_(baseline), des_form_(des_form), eps_trunc_(eps_trunc) {
    config_.validate();
    require(baseline_.num_aps == config_.num_aps && baseline_.num_types == config_.num_types,
            "baseline dimensions do not match the configuration");
    for (int v : baseline_.route)
        require(v >= 0 && v < config_.num_servers, "baseline route outside server range");

    const int K = config_.num_aps;
    const int M = config_.num_servers;
    const int J = config_.num_types;
    const double gamma = config_.discount;

    const double cost_max =
        std::max(static_cast<double>(config_.n_max), config_.l_max + config_.overflow_weight);
    t_trunc_ = truncation_horizon(gamma, cost_max, eps_trunc_);

    const Eigen::VectorXd g = upload_cost_vector(config_.n_max);

    d_ap_.resize(static_cast<std::size_t>(K) * J * M);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j)
            for (int m = 0; m < M; ++m) {
                const double lambda_eff =
                    (baseline_.dest(k, j) == m) ? config_.arrival(k, j) : 0.0;
                StochasticMatrix chain =
                    build_upload_matrix(lambda_eff, config_.upload_mean(k, j, m), config_.n_max);
                Eigen::VectorXd d = discounted_cost_to_go(chain, g, gamma);
                for (int n = 0; n + 1 <= config_.n_max; ++n)
                    if (d(n + 1) < d(n) - 1e-9) {
                        monotonicity_warnings_.fetch_add(1);
                        break;
                    }
                d_ap_[kjm(k, j, m)] = std::move(d);
            }

    // Mean in-flight trajectories of the baseline-fed chains, used by the
    // arrival-rate profiles: entry [t-1](n) is E[N(t) | N(1) = n].
    inflight_mean_.resize(static_cast<std::size_t>(K) * J);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j) {
            const int dest = baseline_.dest(k, j);
            StochasticMatrix chain = build_upload_matrix(
                config_.arrival(k, j), config_.upload_mean(k, j, dest), config_.n_max);
            auto& seq = inflight_mean_[kj(k, j)];
            seq.resize(t_trunc_);
            seq[0] = g;
            for (int t = 1; t < t_trunc_; ++t) seq[t] = chain.entries * seq[t - 1];
        }

    feeders_.assign(static_cast<std::size_t>(J) * M, {});
    for (int j = 0; j < J; ++j)
        for (int m = 0; m < M; ++m) {
            auto& f = feeders_[jm(j, m)];
            for (int k = 0; k < K; ++k)
                if (baseline_.dest(k, j) == m) f.push_back(k);
        }

    kernels_.resize(static_cast<std::size_t>(J) * M);
    for (int j = 0; j < J; ++j)
        for (int m = 0; m < M; ++m) {
            QueueKernel ker;
            ker.dim = queue_space_dim(config_.l_max, config_.eta_max);
            ker.no_arrival =
                sparsify(build_queue_matrix(0.0, config_.pmf(m, j), config_.l_max, config_.eta_max));
            ker.one_arrival =
                sparsify(build_queue_matrix(1.0, config_.pmf(m, j), config_.l_max, config_.eta_max));
            kernels_[jm(j, m)] = std::move(ker);
        }

    queue_cost_ = queue_cost_vector(config_.l_max, config_.eta_max, config_.overflow_weight);
}

const Eigen::VectorXd& ValueTables::d_ap_table(int k, int j, int m) const {
    return d_ap_[kjm(k, j, m)];
}

double ValueTables::expected_inflight(int k, int j, int t, int n) const {
    assert(t >= 1 && t <= t_trunc_);
    return inflight_mean_[kj(k, j)][t - 1](n);
}

const std::vector<int>& ValueTables::feeders(int j, int m) const { return feeders_[jm(j, m)]; }

const QueueKernel& ValueTables::queue_kernel(int j, int m) const { return kernels_[jm(j, m)]; }

double ValueTables::clamp_alpha(double a) const {
    if (a > 1.0) {
        clamp_events_.fetch_add(1, std::memory_order_relaxed);
        return 1.0;
    }
    return a < 0.0 ? 0.0 : a;
}

std::vector<double> ValueTables::profile_from_feeder_n(int j, int m,
                                                       const std::vector<int>& feeder_n) const {
    const auto& fs = feeders_[jm(j, m)];
    assert(fs.size() == feeder_n.size());
    std::vector<double> alpha(static_cast<std::size_t>(t_trunc_), 0.0);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const int k = fs[i];
        const double mean_delay = config_.upload_mean(k, j, m);
        const auto& seq = inflight_mean_[kj(k, j)];
        for (int t = 1; t <= t_trunc_; ++t) alpha[t - 1] += seq[t - 1](feeder_n[i]) / mean_delay;
    }
    for (double& a : alpha) a = clamp_alpha(a);
    return alpha;
}

std::vector<double> ValueTables::arrival_rate_profile(int j, int m, const TypeState& state) const {
    const auto& fs = feeders_[jm(j, m)];
    std::vector<int> feeder_n(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) feeder_n[i] = state.n(fs[i], m);
    return profile_from_feeder_n(j, m, feeder_n);
}

Eigen::VectorXd ValueTables::compute_es_vector(int j, int m, const std::vector<double>& alpha) const {
    const QueueKernel& ker = kernels_[jm(j, m)];
    const Eigen::VectorXd& c = queue_cost_;
    const double gamma = config_.discount;

    Eigen::VectorXd y = c;

    if (des_form_ == DesForm::power) {
        // Term t adds gamma^{t-1} P(alpha(t-1))^{t-1} c. Once the profile has
        // numerically converged the power grows by one matrix application per
        // term, so the running vector can be reused.
        Eigen::VectorXd v(ker.dim), tmp(ker.dim);
        double prev_a = -1.0;
        int prev_power = 0;
        Eigen::VectorXd prev_v;
        for (int t = 2; t <= t_trunc_; ++t) {
            const double a = alpha[static_cast<std::size_t>(t) - 2]; // alpha(t-1)
            const int power = t - 1;
            if (prev_power > 0 && std::abs(a - prev_a) < 1e-15 && power == prev_power + 1) {
                ker.apply(a, prev_v, tmp);
                prev_v.swap(tmp);
            } else {
                v = c;
                for (int s = 0; s < power; ++s) {
                    ker.apply(a, v, tmp);
                    v.swap(tmp);
                }
                prev_v = v;
            }
            prev_a = a;
            prev_power = power;
            y += std::pow(gamma, power) * prev_v;
        }
    } else {
        // Chained form: term t adds gamma^{t-1} P(alpha(1))...P(alpha(t-1)) c.
        // The left product is accumulated as a dense matrix.
        const int dim = ker.dim;
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(dim, dim);
        Eigen::MatrixXd nb(dim, dim);
        for (int t = 2; t <= t_trunc_; ++t) {
            const double a = alpha[static_cast<std::size_t>(t) - 2];
            nb.setZero();
            if (a < 1.0) {
                const double w = 1.0 - a;
                for (int q = 0; q < dim; ++q)
                    for (const auto& [p, v] : ker.no_arrival[q]) nb.col(p) += (w * v) * b.col(q);
            }
            if (a > 0.0) {
                for (int q = 0; q < dim; ++q)
                    for (const auto& [p, v] : ker.one_arrival[q]) nb.col(p) += (a * v) * b.col(q);
            }
            b.swap(nb);
            y += std::pow(gamma, t - 1) * (b * c);
        }
    }
    return y;
}

const Eigen::VectorXd& ValueTables::es_vector(int j, int m, const std::vector<int>& feeder_n) const {
    std::vector<std::int32_t> key;
    key.reserve(feeder_n.size() + 2);
    key.push_back(j);
    key.push_back(m);
    for (int n : feeder_n) key.push_back(n);

    {
        std::shared_lock lock(cache_mutex_);
        auto it = es_cache_.find(key);
        if (it != es_cache_.end()) return it->second;
    }
    Eigen::VectorXd y = compute_es_vector(j, m, profile_from_feeder_n(j, m, feeder_n));
    std::unique_lock lock(cache_mutex_);
    auto [it, inserted] = es_cache_.try_emplace(std::move(key), std::move(y));
    return it->second;
}

const Eigen::VectorXd& ValueTables::es_vector_marginal(
    int j, int m, const std::vector<std::pair<int, int>>& feeder_key) const {
    const auto& fs = feeders_[jm(j, m)];
    assert(fs.size() == feeder_key.size());

    std::vector<std::int32_t> key;
    key.reserve(feeder_key.size() + 2);
    key.push_back(j);
    key.push_back(m);
    for (const auto& [n, routed] : feeder_key) key.push_back(n * 2 + routed);

    {
        std::shared_lock lock(cache_mutex_);
        auto it = es_cache_marginal_.find(key);
        if (it != es_cache_marginal_.end()) return it->second;
    }

    // Expected arrival-rate profile of the successor state: each feeder's
    // contribution is averaged over its one-slot transition from (n, routed).
    std::vector<double> alpha(static_cast<std::size_t>(t_trunc_), 0.0);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const int k = fs[i];
        const auto [n0, routed] = feeder_key[i];
        const double mean_delay = config_.upload_mean(k, j, m);
        const double u = 1.0 / mean_delay;
        const double lambda = routed ? config_.arrival(k, j) : 0.0;

        std::vector<double> succ(static_cast<std::size_t>(config_.n_max) + 1, 0.0);
        std::vector<double> dpmf(static_cast<std::size_t>(n0) + 1, 0.0);
        dpmf[0] = 1.0;
        for (int s = 1; s <= n0; ++s)
            for (int d = s; d >= 0; --d)
                dpmf[d] = (d > 0 ? dpmf[d - 1] * u : 0.0) + dpmf[d] * (1.0 - u);
        for (int a = 0; a <= 1; ++a) {
            const double pa = (a == 1) ? lambda : 1.0 - lambda;
            if (pa == 0.0) continue;
            for (int d = 0; d <= n0; ++d)
                succ[std::min(n0 + a - d, config_.n_max)] += pa * dpmf[d];
        }

        const auto& seq = inflight_mean_[kj(k, j)];
        for (int t = 1; t <= t_trunc_; ++t) {
            double e = 0.0;
            for (int n = 0; n <= config_.n_max; ++n)
                if (succ[n] != 0.0) e += succ[n] * seq[t - 1](n);
            alpha[t - 1] += e / mean_delay;
        }
    }
    for (double& a : alpha) a = clamp_alpha(a);

    Eigen::VectorXd y = compute_es_vector(j, m, alpha);
    std::unique_lock lock(cache_mutex_);
    auto [it, inserted] = es_cache_marginal_.try_emplace(std::move(key), std::move(y));
    return it->second;
}

double ValueTables::d_es(int j, int m, const TypeState& state) const {
    const auto& fs = feeders_[jm(j, m)];
    std::vector<int> feeder_n(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) feeder_n[i] = state.n(fs[i], m);
    const Eigen::VectorXd& y = es_vector(j, m, feeder_n);
    return y(queue_state_index(state.q(m), config_.eta_max));
}

double ValueTables::w_j(int j, const TypeState& state) const {
    double w = 0.0;
    for (int k = 0; k < config_.num_aps; ++k)
        for (int m = 0; m < config_.num_servers; ++m) w += d_ap_[kjm(k, j, m)](state.n(k, m));
    for (int m = 0; m < config_.num_servers; ++m) w += d_es(j, m, state);
    return w;
}

double ValueTables::v_baseline(const SystemState& state) const {
    double v = 0.0;
    for (int j = 0; j < config_.num_types; ++j) v += w_j(j, state.types[j]);
    return v;
}

} // namespace edgedispatch
