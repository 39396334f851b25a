#include "icl/solvers.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "icl/errors.hpp"

namespace icl {

namespace {

void check_shapes(const LassoProblem& p) {
    if (p.X.rows() != p.y.size()) throw std::invalid_argument("X rows and y size disagree");
    if (p.alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

} // namespace

double soft_threshold(double x, double theta) {
    if (theta < 0) throw std::invalid_argument("soft_threshold: theta must be nonnegative");
    if (x > theta) return x - theta;
    if (x < -theta) return x + theta;
    return 0.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double theta) {
    if (theta < 0) throw std::invalid_argument("soft_threshold: theta must be nonnegative");
    return x.array().sign() * (x.array().abs() - theta).max(0.0);
}

double lasso_objective(const Eigen::VectorXd& beta, const LassoProblem& problem) {
    check_shapes(problem);
    if (beta.size() != problem.X.cols())
        throw std::invalid_argument("beta size and X columns disagree");
    return 0.5 * (problem.y - problem.X * beta).squaredNorm() +
           problem.alpha * beta.lpNorm<1>();
}

double spectral_norm_sq(const Eigen::MatrixXd& X) {
    if (X.size() == 0 || X.norm() == 0.0)
        throw std::invalid_argument("spectral_norm_sq: X must be nonzero");
    const Eigen::MatrixXd gram = X.transpose() * X;
    const Eigen::Index d = gram.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d) / std::sqrt(static_cast<double>(d));
    double lambda = 0.0;
    constexpr int kMaxIter = 10000;
    constexpr double kRelTol = 1e-8;
    double residual = 0.0;
    for (int it = 0; it < kMaxIter; ++it) {
        Eigen::VectorXd w = gram * v;
        const double norm = w.norm();
        if (norm == 0.0) throw NumericError("spectral_norm_sq: start vector in null space");
        w /= norm;
        lambda = w.dot(gram * w);
        residual = (gram * w - lambda * w).norm();
        v = w;
        if (residual <= kRelTol * std::abs(lambda)) return lambda;
    }
    throw NumericError("spectral_norm_sq: power iteration did not converge, residual " +
                       std::to_string(residual));
}

SolverTrace ista_solve(const LassoProblem& problem, int iterations,
                       const Eigen::VectorXd* beta_star) {
    check_shapes(problem);
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    Timer timer;

    const double lip = spectral_norm_sq(problem.X);
    const double step = 1.0 / lip;
    const double theta = problem.alpha * step;
    const Eigen::Index d = problem.X.cols();

    SolverTrace trace;
    trace.betas.setZero(iterations + 1, d);
    trace.objectives.resize(iterations + 1);
    if (beta_star) trace.errors_to_truth.resize(iterations + 1);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    for (int k = 0; k <= iterations; ++k) {
        trace.betas.row(k) = beta.transpose();
        trace.objectives[k] = lasso_objective(beta, problem);
        if (beta_star) trace.errors_to_truth[k] = (beta - *beta_star).norm();
        if (k == iterations) break;
        beta = soft_threshold(beta - step * (problem.X.transpose() * (problem.X * beta - problem.y)),
                              theta);
    }
    trace.wall_time = timer.seconds();
    return trace;
}

SolverTrace fista_solve(const LassoProblem& problem, int iterations,
                        const Eigen::VectorXd* beta_star) {
    check_shapes(problem);
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    Timer timer;

    const double lip = spectral_norm_sq(problem.X);
    const double step = 1.0 / lip;
    const double theta = problem.alpha * step;
    const Eigen::Index d = problem.X.cols();

    SolverTrace trace;
    trace.betas.setZero(iterations + 1, d);
    trace.objectives.resize(iterations + 1);
    if (beta_star) trace.errors_to_truth.resize(iterations + 1);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd momentum_pt = beta;
    double t = 1.0;
    for (int k = 0; k <= iterations; ++k) {
        trace.betas.row(k) = beta.transpose();
        trace.objectives[k] = lasso_objective(beta, problem);
        if (beta_star) trace.errors_to_truth[k] = (beta - *beta_star).norm();
        if (k == iterations) break;
        const Eigen::VectorXd next = soft_threshold(
            momentum_pt - step * (problem.X.transpose() * (problem.X * momentum_pt - problem.y)),
            theta);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        momentum_pt = next + ((t - 1.0) / t_next) * (next - beta);
        beta = next;
        t = t_next;
    }
    trace.wall_time = timer.seconds();
    return trace;
}

void trace_to_csv(const SolverTrace& trace, std::ostream& out) {
    out << "k,objective,err_l2\n";
    char buf[64];
    for (Eigen::Index k = 0; k < trace.betas.rows(); ++k) {
        out << k;
        std::snprintf(buf, sizeof(buf), ",%.17g", trace.objectives[k]);
        out << buf;
        if (trace.errors_to_truth.size() == trace.betas.rows()) {
            std::snprintf(buf, sizeof(buf), ",%.17g", trace.errors_to_truth[k]);
            out << buf;
        } else {
            out << ",";
        }
        out << "\n";
    }
}

} // namespace icl
