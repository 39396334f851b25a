#pragma once

#include <iosfwd>

#include <Eigen/Dense>

namespace icl {

/// LASSO problem: minimize 0.5*||y - X beta||^2 + alpha*||beta||_1.
struct LassoProblem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    double alpha = 0.1;
};

/// Per-iteration record shared by classical and learned solvers.
///
/// Row k of `betas` is the k-th iterate, starting with the initializer.
/// `objectives` holds the LASSO loss per iterate (classical solvers) or the
/// residual term 0.5*||y - X beta||^2 (learned solvers, which carry no alpha).
/// `errors_to_truth` is filled only when the ground truth was supplied.
struct SolverTrace {
    Eigen::MatrixXd betas;           // (K+1) x d
    Eigen::VectorXd objectives;      // K+1
    Eigen::VectorXd errors_to_truth; // K+1 or empty
    double wall_time = 0.0;

    int iterations() const { return static_cast<int>(betas.rows()) - 1; }
    Eigen::VectorXd final_beta() const { return betas.row(betas.rows() - 1); }
};

/// Soft threshold S_theta, the proximal map of theta*||.||_1.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double theta);
double soft_threshold(double x, double theta);

double lasso_objective(const Eigen::VectorXd& beta, const LassoProblem& problem);

/// Largest eigenvalue of X^T X via power iteration (deterministic all-ones
/// start, relative tolerance 1e-8, at most 1e4 iterations). Throws
/// NumericError carrying the final residual if it fails to converge.
double spectral_norm_sq(const Eigen::MatrixXd& X);

SolverTrace ista_solve(const LassoProblem& problem, int iterations,
                       const Eigen::VectorXd* beta_star = nullptr);
SolverTrace fista_solve(const LassoProblem& problem, int iterations,
                        const Eigen::VectorXd* beta_star = nullptr);

/// CSV dump with columns k,objective,err_l2 (err_l2 blank when unknown).
void trace_to_csv(const SolverTrace& trace, std::ostream& out);

} // namespace icl
