#include "edgedispatch/markov.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "edgedispatch/model.hpp"

namespace edgedispatch {

double StochasticMatrix::row_sum_error() const {
    double worst = 0.0;
    for (int q = 0; q < dim(); ++q) worst = std::max(worst, std::abs(entries.row(q).sum() - 1.0));
    return worst;
}

bool StochasticMatrix::is_stochastic(double tol) const {
    if (row_sum_error() > tol) return false;
    return (entries.array() >= -tol).all() && (entries.array() <= 1.0 + tol).all();
}

StochasticMatrix build_upload_matrix(double lambda, double upload_mean, int n_max) {
    require(lambda >= 0.0 && lambda <= 1.0, "lambda outside [0,1]");
    require(upload_mean >= 1.0, "upload_mean must be >= 1");
    require(n_max >= 1, "n_max must be >= 1");

    const int dim = n_max + 1;
    const double u = 1.0 / upload_mean;
    StochasticMatrix m;
    m.entries = Eigen::MatrixXd::Zero(dim, dim);

    for (int q = 0; q < dim; ++q) {
        // D ~ Binomial(q, u) departures, A ~ Bernoulli(lambda) arrival,
        // N' = min(q + A - D, n_max).
        std::vector<double> dpmf(static_cast<std::size_t>(q) + 1, 0.0);
        dpmf[0] = 1.0;
        for (int i = 1; i <= q; ++i)
            for (int d = i; d >= 0; --d)
                dpmf[d] = (d > 0 ? dpmf[d - 1] * u : 0.0) + dpmf[d] * (1.0 - u);

        for (int a = 0; a <= 1; ++a) {
            const double pa = (a == 1) ? lambda : 1.0 - lambda;
            if (pa == 0.0) continue;
            for (int d = 0; d <= q; ++d) {
                int p = std::min(q + a - d, n_max);
                m.entries(q, p) += pa * dpmf[d];
            }
        }
    }
    assert(m.is_stochastic(1e-12));
    return m;
}

StochasticMatrix build_queue_matrix(double alpha, const CompTimePmf& f, int l_max, int eta_max) {
    require(alpha >= 0.0 && alpha <= 1.0, "alpha outside [0,1]; clamp before building");
    require(static_cast<int>(f.size()) == eta_max, "pmf must have eta_max entries");
    require(l_max >= 1 && eta_max >= 1, "invalid caps");

    const int dim = queue_space_dim(l_max, eta_max);
    StochasticMatrix m;
    m.entries = Eigen::MatrixXd::Zero(dim, dim);

    for (int idx = 0; idx < dim; ++idx) {
        QueueState q = queue_state_from_index(idx, eta_max);
        for (int a = 0; a <= 1; ++a) {
            const double pa = (a == 1) ? alpha : 1.0 - alpha;
            if (pa == 0.0) continue;
            QueueUpdate u = queue_update(q, a, l_max);
            if (!u.needs_redraw) {
                int p = queue_state_index(QueueState{u.next_length, u.next_remaining}, eta_max);
                m.entries(idx, p) += pa;
            } else {
                for (int b = 1; b <= eta_max; ++b) {
                    if (f[b - 1] == 0.0) continue;
                    int p = queue_state_index(QueueState{u.next_length, b}, eta_max);
                    m.entries(idx, p) += pa * f[b - 1];
                }
            }
        }
    }
    assert(m.is_stochastic(1e-12));
    return m;
}

Eigen::VectorXd upload_cost_vector(int n_max) {
    Eigen::VectorXd g(n_max + 1);
    for (int i = 0; i <= n_max; ++i) g(i) = static_cast<double>(i);
    return g;
}

Eigen::VectorXd queue_cost_vector(int l_max, int eta_max, double beta) {
    const int dim = queue_space_dim(l_max, eta_max);
    Eigen::VectorXd c(dim);
    for (int i = 0; i < dim; ++i) {
        QueueState q = queue_state_from_index(i, eta_max);
        c(i) = (q.length == l_max) ? static_cast<double>(l_max) + beta : static_cast<double>(q.length);
    }
    return c;
}

Eigen::VectorXd discounted_cost_to_go(const StochasticMatrix& m, const Eigen::VectorXd& g,
                                      double gamma) {
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    require(g.size() == m.dim(), "cost vector dimension mismatch");

    const int dim = m.dim();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim) - gamma * m.entries;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd x = lu.solve(g);

    double residual = (a * x - g).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if (!(residual <= 1e-8 * scale))
        throw std::runtime_error("discounted_cost_to_go: solve residual " + std::to_string(residual));
    return x;
}

Eigen::VectorXd truncated_neumann(const StochasticMatrix& m, const Eigen::VectorXd& g, double gamma,
                                  int terms) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.size());
    Eigen::VectorXd term = g;
    for (int t = 1; t <= terms; ++t) {
        acc += term;
        if (t < terms) term = gamma * (m.entries * term);
    }
    return acc;
}

int truncation_horizon(double gamma, double cost_max, double eps) {
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    require(eps > 0.0 && cost_max > 0.0, "eps and cost_max must be positive");
    double t = std::log(eps * (1.0 - gamma) / cost_max) / std::log(gamma);
    return std::max(1, static_cast<int>(std::ceil(t)));
}

double spectral_radius(const StochasticMatrix& m, int iterations) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m.dim(), 1.0 / std::sqrt(m.dim()));
    double lambda = 0.0;
    for (int i = 0; i < iterations; ++i) {
        Eigen::VectorXd w = m.entries * v;
        lambda = w.norm();
        if (lambda == 0.0) return 0.0;
        v = w / lambda;
    }
    return lambda;
}

} // namespace edgedispatch
