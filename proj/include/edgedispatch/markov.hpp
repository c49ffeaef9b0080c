// Transition matrices of the upload and queue chains, and the discounted
// cost-to-go solve (I - gamma*M)^{-1} g that both value-function lemmas use.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "edgedispatch/types.hpp"

namespace edgedispatch {

/// Dense row-stochastic matrix: entry (q,p) is the probability of moving from
/// state q to state p in one slot.
struct StochasticMatrix {
    Eigen::MatrixXd entries;

    int dim() const { return static_cast<int>(entries.rows()); }

    /// Max row-sum deviation from 1; entries are also required to lie in [0,1].
    double row_sum_error() const;
    bool is_stochastic(double tol = 1e-12) const;
};

/// Transition matrix of one in-flight chain N_{k,j}^m on {0..n_max}: binomial
/// departures at rate 1/upload_mean, a Bernoulli(lambda) arrival, and the
/// reflecting clamp at n_max. lambda must be 0 for chains the policy does not
/// feed.
StochasticMatrix build_upload_matrix(double lambda, double upload_mean, int n_max);

/// Transition matrix of one queue chain on the encoded (L, eta) space of
/// dimension l_max*eta_max + 1, with the aggregate arrival stream approximated
/// by a Bernoulli(alpha) single arrival per slot.
StochasticMatrix build_queue_matrix(double alpha, const CompTimePmf& f, int l_max, int eta_max);

/// Linear cost of the upload chain: entry i is i.
Eigen::VectorXd upload_cost_vector(int n_max);

/// Queue-chain cost: queue length below the overflow band, l_max + beta at
/// the band (every encoded index with L == l_max).
Eigen::VectorXd queue_cost_vector(int l_max, int eta_max, double beta);

/// Solve (I - gamma*M) x = g. x_i is the discounted expected cumulative cost
/// of the chain started at state i. Throws std::runtime_error if the solve
/// does not reproduce g within tolerance (impossible for a stochastic M and
/// gamma < 1, so treated as an internal failure).
Eigen::VectorXd discounted_cost_to_go(const StochasticMatrix& m, const Eigen::VectorXd& g,
                                      double gamma);

/// Truncated Neumann series sum_{t=1..terms} (gamma*M)^{t-1} g; reference
/// implementation for validating the linear solve.
Eigen::VectorXd truncated_neumann(const StochasticMatrix& m, const Eigen::VectorXd& g, double gamma,
                                  int terms);

/// Number of series terms after which the discounted tail is below eps:
/// gamma^T * cost_max / (1 - gamma) < eps.
int truncation_horizon(double gamma, double cost_max, double eps);

/// Spectral radius estimate by power iteration.
double spectral_radius(const StochasticMatrix& m, int iterations = 200);

} // namespace edgedispatch
