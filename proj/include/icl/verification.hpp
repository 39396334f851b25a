#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "icl/instance.hpp"
#include "icl/learned.hpp"
#include "icl/solvers.hpp"

namespace icl {

/// Coherence of D_n = (1/m) X_prefix (M^V)^T against X_prefix.
/// sigma_min / sigma_max_diag run over the given support; the *_all fields
/// cover every coordinate (needed by the per-coordinate step-size condition).
struct CoherenceStats {
    double sigma_min = 0.0;      // min_{i in S} |D_{:,i}^T X_{:,i}|
    double sigma_max_diag = 0.0; // max_{i in S} of the same
    double mu_offdiag = 0.0;     // max_{i != j} |D_{:,i}^T X_{:,j}|
    double diag_min_all = 0.0;   // min over all coordinates of D_{:,i}^T X_{:,i}
    double diag_max_all = 0.0;
    int n = 0;
};

CoherenceStats coherence_stats(const Eigen::MatrixXd& X_prefix, const Eigen::MatrixXd& m_value,
                               double normalizer, const std::vector<int>& support);

/// Linear-convergence condition: lhs = gamma*(2S-1)*mu_offdiag + |1 - gamma*sigma_min|
/// must not exceed 1 and every scaled diagonal gamma*D_{:,i}^T X_{:,i} must lie
/// in [0, 1]. implied_rate is -log(lhs), capped at 50.
struct ConditionReport {
    double lhs = 0.0;
    bool passes = false;
    double implied_rate = 0.0;
};

ConditionReport check_condition(const CoherenceStats& stats, double gamma, int sparsity);

/// Max l-inf deviation between the constructed-Transformer beta trace and the
/// LISTA-VM recursion over every layer k <= K and prefix n <= N.
/// `gating_bound` overrides the constructed B (used by the negative control).
double check_equivalence(const SparseInstance& inst, int layers, double gamma,
                         const Eigen::VectorXd& theta_schedule, double sigma_d = 1.0,
                         std::optional<double> gating_bound = std::nullopt);

/// Least-squares fit of log error against the iteration index over the range
/// above the numeric floor (1e-12).
struct RateReport {
    double slope = 0.0;
    double r2 = 0.0;
    int floor_k = -1;     // first iterate at or below the floor, -1 if none
    bool degenerate = false;
};

RateReport convergence_rate(const SolverTrace& trace, const Eigen::VectorXd& beta_star);

/// Central finite differences against the hand-written reverse mode.
/// Batches whose pre-activations land within 1e-4 of a threshold kink are
/// resampled (up to ten times); if none qualifies the check is inconclusive.
struct FiniteDiffReport {
    double max_rel_err = 0.0;
    bool inconclusive = false;
};

FiniteDiffReport finite_diff_check(ModelKind kind, int layers, const InstanceConfig& config,
                                   std::uint64_t seed, int batch_size = 3, double h = 1e-5);

/// Runs LISTA-VM against LISTA-VM-SS with matched parameters.
struct SupportVariantReport {
    double err_vm = 0.0;
    double err_ss = 0.0;
    double ratio = 0.0;          // err_ss / err_vm
    bool ss_zero_outside = false; // [beta]_i == 0 for i outside the support, all k
};

SupportVariantReport support_variant_check(const SparseInstance& inst,
                                           const std::vector<int>& support,
                                           const ListaVmParams& params);

/// PASS/FAIL report lines consumed by the acceptance suite.
struct CheckLine {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

void write_report_csv(const std::vector<CheckLine>& lines, std::ostream& out);
void write_report_text(const std::vector<CheckLine>& lines, std::ostream& out);

} // namespace icl
