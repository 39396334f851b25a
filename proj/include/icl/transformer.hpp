#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "icl/instance.hpp"

namespace icl {

/// One masked ReLU attention head; all matrices are D x D with D = 2d+2.
struct AttentionHead {
    Eigen::MatrixXd Q, K, V;
};

/// Token-wise feedforward block h -> h + W2 * relu(W1 h + b).
struct MlpWeights {
    Eigen::MatrixXd W1; // D' x D
    Eigen::MatrixXd W2; // D x D'
    Eigen::VectorXd b;  // D'
};

/// Head order within a layer: +1, -1, +2, -2.
struct TransformerLayer {
    std::array<AttentionHead, 4> heads;
    MlpWeights mlp;
};

/// Construction metadata recorded alongside the explicit weights.
struct ConstructionMeta {
    Eigen::VectorXd gamma;   // per layer
    Eigen::MatrixXd m_value; // M^V, d x d
    Eigen::VectorXd theta;   // threshold schedule
    double gating_bound = 0.0; // B
};

struct TransformerWeights {
    std::vector<TransformerLayer> layers;
    ConstructionMeta meta;
    int d = 0;

    int depth() const { return static_cast<int>(layers.size()); }
    int width() const { return 2 * d + 2; }
};

/// The (2d+2) x (2N+1) token matrix of Eq.-style embeddings: column 2i
/// (0-based) carries (x_{i+1}, 0, 0_d, 1) and column 2i+1 carries
/// (x_{i+1}, y_{i+1}, 0_d, 0); the final column holds the query with flag 1.
struct EmbeddingSequence {
    Eigen::MatrixXd H;
    int d = 0;
    int N = 0;
};

/// kind selects how a prediction is read off the output sequence.
struct ReadOutSpec {
    enum class Kind { linear, query, query_theory };
    Kind kind = Kind::query;
    Eigen::VectorXd v;  // linear read-out vector (D)
    Eigen::MatrixXd V;  // query read-out matrix (D x d)
};

/// out = H + sum_m (V_m H) * mask(relu((K_m H)^T (Q_m H))), where mask scales
/// column j by 1/(j+1) (0-based) and zeroes strictly-lower keys i > j.
Eigen::MatrixXd masked_attention(const Eigen::MatrixXd& H,
                                 const std::vector<AttentionHead>& heads);

Eigen::MatrixXd mlp_apply(const Eigen::MatrixXd& H, const MlpWeights& mlp);

EmbeddingSequence embed_instance(const SparseInstance& inst);

/// Explicit four-head construction. gamma must lie in (0, 1.5]; M^V is
/// (2/sigma_d^2) I. When B is not given it defaults to the worst-case gating
/// bound b_beta*b_x + b_x*sqrt(d)*(b_beta + C_beta^K); bounds default from the
/// Gaussian instance family but can be overridden.
TransformerWeights build_constructed_weights(int d, int layers, double gamma, double sigma_d,
                                             const Eigen::VectorXd& theta_schedule,
                                             std::optional<double> gating_bound = std::nullopt,
                                             std::optional<double> x_norm_bound = std::nullopt,
                                             std::optional<double> beta_l1_bound = std::nullopt);

/// Empirical alternative to the worst-case B: ten times the largest |beta^T x|
/// seen in a pilot run of the equivalent recursion over the given instances.
double empirical_gating_bound(int layers, double gamma, double sigma_d,
                              const Eigen::VectorXd& theta_schedule,
                              const std::vector<SparseInstance>& pilot);

/// Runs the K blocks and returns all hidden states H^(1..K+1).
/// Throws NumericError naming the first layer that produced non-finite values.
std::vector<Eigen::MatrixXd> forward(const TransformerWeights& weights,
                                     const Eigen::MatrixXd& H1);

/// beta carried by token 2n+1 (prefix n), i.e. rows d+1..2d of column 2n (0-based).
Eigen::VectorXd extract_beta(const Eigen::MatrixXd& H, int d, int n);

/// Query read-out for measurement row n (1-based; n = N+1 means the query
/// pair): x_n^T extract_beta(H_last, n-1).
double readout_query(const Eigen::MatrixXd& H_last, const SparseInstance& inst, int n);

/// Two-head averaging layer: writes yhat_{n+1} =
/// (2/(2n+1)) sum_{i<=n} (beta_{2i+1})^T x_{n+1} into coordinate d of every
/// odd column 2n+1. Implemented as a real masked-attention layer.
Eigen::MatrixXd final_average_layer(const Eigen::MatrixXd& H_last, int d);

double readout_linear(const Eigen::MatrixXd& H, const Eigen::VectorXd& v, int column);

/// The fixed read-out parameters used throughout: v = e_{d} (0-based y slot)
/// and V stacking I_d into the beta rows.
ReadOutSpec linear_readout_spec(int d);
ReadOutSpec query_readout_spec(int d);

/// CSV dump with columns layer,column,coordinate,value.
void dump_hidden_states(const std::vector<Eigen::MatrixXd>& states, std::ostream& out);

std::vector<std::uint8_t> serialize_weights(const TransformerWeights& weights);
TransformerWeights deserialize_weights(const std::uint8_t* data, std::size_t size);

} // namespace icl
