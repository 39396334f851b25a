#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "icl/instance.hpp"
#include "icl/solvers.hpp"

namespace icl {

enum class ModelKind { lista, lista_cp, lista_vm };

/// LISTA-VM: beta <- S_theta(beta - (1/m) M_k X^T (X beta - y)).
/// The per-layer matrix M_k absorbs the step size gamma of the constructed
/// Transformer (M_k = gamma * M^V there).
struct ListaVmParams {
    std::vector<Eigen::MatrixXd> M; // d x d per layer
    Eigen::VectorXd theta;          // >= 0 per layer

    int layers() const { return static_cast<int>(M.size()); }
    int d() const { return M.empty() ? 0 : static_cast<int>(M[0].rows()); }
};

/// LISTA-CP: beta <- S_theta(beta - D_k^T (X beta - y)); D_k tied to one X shape.
struct ListaCpParams {
    std::vector<Eigen::MatrixXd> D; // N x d per layer
    Eigen::VectorXd theta;

    int layers() const { return static_cast<int>(D.size()); }
};

/// LISTA: beta <- S_theta(W1_k y + W2_k beta).
struct ListaParams {
    std::vector<Eigen::MatrixXd> W1; // d x N per layer
    std::vector<Eigen::MatrixXd> W2; // d x d per layer
    Eigen::VectorXd theta;

    int layers() const { return static_cast<int>(W1.size()); }
};

/// Normalizer sentinel: use m = 2n+1 where n is the number of prefix rows.
inline constexpr int kEmbeddingNormalizer = -1;

SolverTrace lista_vm_forward(const ListaVmParams& params, const Eigen::MatrixXd& X_prefix,
                             const Eigen::VectorXd& y_prefix,
                             int normalizer = kEmbeddingNormalizer,
                             const Eigen::VectorXd* beta_star = nullptr);

/// LISTA-VM with the measurement columns outside `support` zeroed; iterates
/// stay exactly zero off the support.
SolverTrace lista_vm_ss_forward(const ListaVmParams& params, const std::vector<int>& support,
                                const Eigen::MatrixXd& X_prefix, const Eigen::VectorXd& y_prefix,
                                int normalizer = kEmbeddingNormalizer,
                                const Eigen::VectorXd* beta_star = nullptr);

SolverTrace lista_cp_forward(const ListaCpParams& params, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y,
                             const Eigen::VectorXd* beta_star = nullptr);

SolverTrace lista_forward(const ListaParams& params, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y,
                          const Eigen::VectorXd* beta_star = nullptr);

/// Exact reverse-mode gradients of sum_j ||beta_hat_j - beta*_j||^2 through the
/// unrolled iterations. The subgradient of the soft threshold at the kink is 0.
/// Gradient containers mirror the parameter layout.
struct ListaVmGrad { std::vector<Eigen::MatrixXd> M; Eigen::VectorXd theta; double loss = 0.0; };
struct ListaCpGrad { std::vector<Eigen::MatrixXd> D; Eigen::VectorXd theta; double loss = 0.0; };
struct ListaGrad {
    std::vector<Eigen::MatrixXd> W1, W2;
    Eigen::VectorXd theta;
    double loss = 0.0;
};

ListaVmGrad grad_lista_vm(const ListaVmParams& params, const std::vector<SparseInstance>& batch,
                          int normalizer = kEmbeddingNormalizer,
                          const std::optional<std::vector<int>>& support = std::nullopt);
ListaCpGrad grad_lista_cp(const ListaCpParams& params, const std::vector<SparseInstance>& batch);
ListaGrad grad_lista(const ListaParams& params, const std::vector<SparseInstance>& batch);

/// Theory-prescribed LISTA-VM parameters: M_k = gamma * (2/sigma_d^2) * I_d and
/// theta_k = gamma * mu_hat * b_beta * rho^(k-1). Requires 0 < gamma <= 1.5.
ListaVmParams theory_params(int d, double sigma_d, double gamma, double b_beta, double mu_hat,
                            double rho, int layers);

struct TrainConfig {
    int epochs = 20;
    int matrices_per_epoch = 20;
    int instances_per_matrix = 100;
    double learning_rate = 1e-3;
    bool use_momentum = true;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool fixed_x = false;
    int layers = 12;
    double alpha = 0.1; // only used to seed the ISTA-specialization warm start
    InstanceConfig instance;
    std::optional<std::vector<int>> support_set; // train the support-selected variant

    void validate() const;
};

/// Per-epoch training diagnostics (CSV columns epoch,train_loss,
/// test_err_fixed_x,test_err_varying_x; test columns are NaN when no test set
/// was supplied).
struct TrainCurve {
    std::vector<double> train_loss;
    std::vector<double> test_err_fixed_x;
    std::vector<double> test_err_varying_x;
};

struct ListaVmTrainResult { ListaVmParams params; TrainCurve curve; };
struct ListaCpTrainResult { ListaCpParams params; TrainCurve curve; };
struct ListaTrainResult { ListaParams params; TrainCurve curve; };

/// Optional held-out sets evaluated at the end of every epoch.
struct EvalSets {
    std::vector<SparseInstance> fixed_x;
    std::vector<SparseInstance> varying_x;
};

ListaVmTrainResult meta_train_lista_vm(const TrainConfig& config, const EvalSets* eval = nullptr);
ListaCpTrainResult meta_train_lista_cp(const TrainConfig& config, const EvalSets* eval = nullptr);
ListaTrainResult meta_train_lista(const TrainConfig& config, const EvalSets* eval = nullptr);

/// The shared measurement matrix a fixed-X training run draws from its seed;
/// evaluation on "the training X" reconstructs it from the same config.
Eigen::MatrixXd training_fixed_x(const TrainConfig& config);

/// Mean squared sparse-vector prediction error ||beta_hat - beta*||^2 at the
/// final iterate, averaged over the set.
double mean_prediction_loss(const ListaVmParams& params, const std::vector<SparseInstance>& set,
                            const std::optional<std::vector<int>>& support = std::nullopt);
double mean_prediction_loss(const ListaCpParams& params, const std::vector<SparseInstance>& set);
double mean_prediction_loss(const ListaParams& params, const std::vector<SparseInstance>& set);

void train_curve_to_csv(const TrainCurve& curve, std::ostream& out);

std::vector<std::uint8_t> serialize_params(const ListaVmParams&);
std::vector<std::uint8_t> serialize_params(const ListaCpParams&);
std::vector<std::uint8_t> serialize_params(const ListaParams&);
ModelKind peek_params_kind(const std::uint8_t* data, std::size_t size);
ListaVmParams deserialize_lista_vm_params(const std::uint8_t* data, std::size_t size);
ListaCpParams deserialize_lista_cp_params(const std::uint8_t* data, std::size_t size);
ListaParams deserialize_lista_params(const std::uint8_t* data, std::size_t size);

} // namespace icl
