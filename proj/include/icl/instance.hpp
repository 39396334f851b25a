#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace icl {

/// Sampling configuration for in-context sparse-recovery instances.
///
/// `x_variances` are the per-coordinate variances of the measurement rows
/// (empty means all ones). `beta_l1_bound` / `x_norm_bound` are recorded
/// bounds consumed by downstream constructions; they are not enforced by
/// rejection sampling. Zero means "derive a default from d and sparsity".
struct InstanceConfig {
    int d = 20;
    int n_measurements = 10;
    int sparsity = 3;
    std::optional<std::vector<int>> support_set;  // 0-based coordinate subset
    double noise_std = 0.0;
    Eigen::VectorXd x_variances;
    double beta_l1_bound = 0.0;
    double x_norm_bound = 0.0;

    /// Throws std::invalid_argument if the invariants do not hold.
    void validate() const;

    Eigen::VectorXd resolved_variances() const;
    double resolved_beta_l1_bound() const;
    double resolved_x_norm_bound() const;
};

/// One in-context task: N measurement rows, the S-sparse ground truth,
/// the observations and a held-out query pair.
struct SparseInstance {
    Eigen::MatrixXd X;          // N x d, rows are measurement vectors
    Eigen::VectorXd beta_star;  // d
    Eigen::VectorXd y;          // N
    Eigen::VectorXd x_query;    // d
    double y_query = 0.0;

    int d() const { return static_cast<int>(X.cols()); }
    int n() const { return static_cast<int>(X.rows()); }
};

SparseInstance sample_instance(const InstanceConfig& config, std::uint64_t seed);

/// Batch sampling with per-index derived sub-seeds. With `fixed_x` every
/// instance shares the X drawn for the batch seed and only the sparse vector
/// and query vary (the classical LISTA training regime).
std::vector<SparseInstance> sample_batch(const InstanceConfig& config, int count,
                                         std::uint64_t seed, bool fixed_x = false);

std::vector<std::uint8_t> serialize_instance(const SparseInstance& inst);
SparseInstance deserialize_instance(const std::uint8_t* data, std::size_t size);
SparseInstance deserialize_instance(const std::vector<std::uint8_t>& bytes);

std::string instance_to_json(const SparseInstance& inst);
SparseInstance instance_from_json(const std::string& text);

} // namespace icl
