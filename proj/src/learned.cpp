#include "icl/learned.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "icl/errors.hpp"
#include "icl/io.hpp"
#include "icl/rng.hpp"

namespace icl {

namespace {

constexpr std::uint32_t kParamsMagic = 0x504C4349; // "ICLP"
constexpr std::uint32_t kParamsVersion = 1;

int resolve_normalizer(int normalizer, Eigen::Index n_rows) {
    if (normalizer == kEmbeddingNormalizer) return 2 * static_cast<int>(n_rows) + 1;
    if (normalizer < 1) throw std::invalid_argument("normalizer must be positive");
    return normalizer;
}

Eigen::MatrixXd zero_columns_outside(const Eigen::MatrixXd& X, const std::vector<int>& support) {
    if (support.empty()) throw std::invalid_argument("support set must be nonempty");
    Eigen::MatrixXd Xs = Eigen::MatrixXd::Zero(X.rows(), X.cols());
    for (int c : support) {
        if (c < 0 || c >= X.cols()) throw std::invalid_argument("support index out of range");
        Xs.col(c) = X.col(c);
    }
    return Xs;
}

void fill_trace(SolverTrace& trace, const std::vector<Eigen::VectorXd>& betas,
                const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                const Eigen::VectorXd* beta_star) {
    const int rows = static_cast<int>(betas.size());
    const Eigen::Index d = betas[0].size();
    trace.betas.resize(rows, d);
    trace.objectives.resize(rows);
    if (beta_star) trace.errors_to_truth.resize(rows);
    for (int k = 0; k < rows; ++k) {
        trace.betas.row(k) = betas[k].transpose();
        trace.objectives[k] = 0.5 * (y - X * betas[k]).squaredNorm();
        if (beta_star) trace.errors_to_truth[k] = (betas[k] - *beta_star).norm();
    }
}

// Forward passes that retain the pre-activations z_k for reverse mode.

void vm_collect(const ListaVmParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                double inv_m, std::vector<Eigen::VectorXd>& betas,
                std::vector<Eigen::VectorXd>& zs) {
    const Eigen::Index d = X.cols();
    betas.assign(1, Eigen::VectorXd::Zero(d));
    zs.clear();
    for (int k = 0; k < p.layers(); ++k) {
        const Eigen::VectorXd grad = inv_m * (X.transpose() * (X * betas[k] - y));
        zs.push_back(betas[k] - p.M[k] * grad);
        betas.push_back(soft_threshold(zs[k], p.theta[k]));
    }
}

void cp_collect(const ListaCpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                std::vector<Eigen::VectorXd>& betas, std::vector<Eigen::VectorXd>& zs) {
    const Eigen::Index d = X.cols();
    betas.assign(1, Eigen::VectorXd::Zero(d));
    zs.clear();
    for (int k = 0; k < p.layers(); ++k) {
        zs.push_back(betas[k] - p.D[k].transpose() * (X * betas[k] - y));
        betas.push_back(soft_threshold(zs[k], p.theta[k]));
    }
}

void lista_collect(const ListaParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   std::vector<Eigen::VectorXd>& betas, std::vector<Eigen::VectorXd>& zs) {
    const Eigen::Index d = X.cols();
    betas.assign(1, Eigen::VectorXd::Zero(d));
    zs.clear();
    for (int k = 0; k < p.layers(); ++k) {
        zs.push_back(p.W1[k] * y + p.W2[k] * betas[k]);
        betas.push_back(soft_threshold(zs[k], p.theta[k]));
    }
}

// Derivative of S_theta(z) wrt z is the active mask; wrt theta it is -sign(z)
// on the active set. The kink |z| = theta gets subgradient 0.
Eigen::ArrayXd active_mask(const Eigen::VectorXd& z, double theta) {
    return (z.array().abs() > theta).cast<double>();
}

} // namespace

SolverTrace lista_vm_forward(const ListaVmParams& params, const Eigen::MatrixXd& X_prefix,
                             const Eigen::VectorXd& y_prefix, int normalizer,
                             const Eigen::VectorXd* beta_star) {
    if (params.layers() < 1) throw std::invalid_argument("need at least one layer");
    if (X_prefix.rows() < 1) throw std::invalid_argument("need at least one prefix row");
    if (X_prefix.rows() != y_prefix.size())
        throw std::invalid_argument("X_prefix rows and y_prefix size disagree");
    if (params.d() != X_prefix.cols())
        throw std::invalid_argument("parameter dimension and X columns disagree");
    const double inv_m = 1.0 / resolve_normalizer(normalizer, X_prefix.rows());
    std::vector<Eigen::VectorXd> betas, zs;
    vm_collect(params, X_prefix, y_prefix, inv_m, betas, zs);
    SolverTrace trace;
    fill_trace(trace, betas, X_prefix, y_prefix, beta_star);
    return trace;
}

SolverTrace lista_vm_ss_forward(const ListaVmParams& params, const std::vector<int>& support,
                                const Eigen::MatrixXd& X_prefix, const Eigen::VectorXd& y_prefix,
                                int normalizer, const Eigen::VectorXd* beta_star) {
    return lista_vm_forward(params, zero_columns_outside(X_prefix, support), y_prefix,
                            normalizer, beta_star);
}

SolverTrace lista_cp_forward(const ListaCpParams& params, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd* beta_star) {
    if (params.layers() < 1) throw std::invalid_argument("need at least one layer");
    if (X.rows() != y.size()) throw std::invalid_argument("X rows and y size disagree");
    if (params.D[0].rows() != X.rows() || params.D[0].cols() != X.cols())
        throw std::invalid_argument("D shape does not match X shape");
    std::vector<Eigen::VectorXd> betas, zs;
    cp_collect(params, X, y, betas, zs);
    SolverTrace trace;
    fill_trace(trace, betas, X, y, beta_star);
    return trace;
}

SolverTrace lista_forward(const ListaParams& params, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, const Eigen::VectorXd* beta_star) {
    if (params.layers() < 1) throw std::invalid_argument("need at least one layer");
    if (X.rows() != y.size()) throw std::invalid_argument("X rows and y size disagree");
    if (params.W1[0].cols() != y.size() || params.W2[0].rows() != X.cols())
        throw std::invalid_argument("parameter shapes do not match the instance");
    std::vector<Eigen::VectorXd> betas, zs;
    lista_collect(params, X, y, betas, zs);
    SolverTrace trace;
    fill_trace(trace, betas, X, y, beta_star);
    return trace;
}

ListaVmGrad grad_lista_vm(const ListaVmParams& params, const std::vector<SparseInstance>& batch,
                          int normalizer, const std::optional<std::vector<int>>& support) {
    if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
    const int K = params.layers();
    ListaVmGrad g;
    g.M.assign(K, Eigen::MatrixXd::Zero(params.d(), params.d()));
    g.theta = Eigen::VectorXd::Zero(K);

    for (const auto& inst : batch) {
        const Eigen::MatrixXd X = support ? zero_columns_outside(inst.X, *support) : inst.X;
        const double inv_m = 1.0 / resolve_normalizer(normalizer, X.rows());
        std::vector<Eigen::VectorXd> betas, zs;
        vm_collect(params, X, inst.y, inv_m, betas, zs);
        g.loss += (betas[K] - inst.beta_star).squaredNorm();

        const Eigen::MatrixXd gram = X.transpose() * X;
        Eigen::VectorXd dbeta = 2.0 * (betas[K] - inst.beta_star);
        for (int k = K - 1; k >= 0; --k) {
            const Eigen::VectorXd dz = dbeta.array() * active_mask(zs[k], params.theta[k]);
            g.theta[k] -= dz.dot(zs[k].array().sign().matrix());
            const Eigen::VectorXd grad_k = inv_m * (X.transpose() * (X * betas[k] - inst.y));
            g.M[k].noalias() -= dz * grad_k.transpose();
            dbeta = dz - inv_m * (gram * (params.M[k].transpose() * dz));
        }
    }
    return g;
}

ListaCpGrad grad_lista_cp(const ListaCpParams& params, const std::vector<SparseInstance>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
    const int K = params.layers();
    ListaCpGrad g;
    g.D.assign(K, Eigen::MatrixXd::Zero(params.D[0].rows(), params.D[0].cols()));
    g.theta = Eigen::VectorXd::Zero(K);

    for (const auto& inst : batch) {
        std::vector<Eigen::VectorXd> betas, zs;
        cp_collect(params, inst.X, inst.y, betas, zs);
        g.loss += (betas[K] - inst.beta_star).squaredNorm();

        Eigen::VectorXd dbeta = 2.0 * (betas[K] - inst.beta_star);
        for (int k = K - 1; k >= 0; --k) {
            const Eigen::VectorXd dz = dbeta.array() * active_mask(zs[k], params.theta[k]);
            g.theta[k] -= dz.dot(zs[k].array().sign().matrix());
            const Eigen::VectorXd residual = inst.X * betas[k] - inst.y;
            g.D[k].noalias() -= residual * dz.transpose();
            dbeta = dz - inst.X.transpose() * (params.D[k] * dz);
        }
    }
    return g;
}

ListaGrad grad_lista(const ListaParams& params, const std::vector<SparseInstance>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
    const int K = params.layers();
    ListaGrad g;
    g.W1.assign(K, Eigen::MatrixXd::Zero(params.W1[0].rows(), params.W1[0].cols()));
    g.W2.assign(K, Eigen::MatrixXd::Zero(params.W2[0].rows(), params.W2[0].cols()));
    g.theta = Eigen::VectorXd::Zero(K);

    for (const auto& inst : batch) {
        std::vector<Eigen::VectorXd> betas, zs;
        lista_collect(params, inst.X, inst.y, betas, zs);
        g.loss += (betas[K] - inst.beta_star).squaredNorm();

        Eigen::VectorXd dbeta = 2.0 * (betas[K] - inst.beta_star);
        for (int k = K - 1; k >= 0; --k) {
            const Eigen::VectorXd dz = dbeta.array() * active_mask(zs[k], params.theta[k]);
            g.theta[k] -= dz.dot(zs[k].array().sign().matrix());
            g.W1[k].noalias() += dz * inst.y.transpose();
            g.W2[k].noalias() += dz * betas[k].transpose();
            dbeta = params.W2[k].transpose() * dz;
        }
    }
    return g;
}

ListaVmParams theory_params(int d, double sigma_d, double gamma, double b_beta, double mu_hat,
                            double rho, int layers) {
    if (!(gamma > 0.0 && gamma <= 1.5))
        throw std::invalid_argument("theory_params: gamma must lie in (0, 1.5]");
    if (sigma_d <= 0) throw std::invalid_argument("theory_params: sigma_d must be positive");
    if (layers < 1) throw std::invalid_argument("theory_params: need at least one layer");
    if (d < 1) throw std::invalid_argument("theory_params: d must be positive");
    ListaVmParams p;
    p.M.assign(layers,
               (gamma * 2.0 / (sigma_d * sigma_d)) * Eigen::MatrixXd::Identity(d, d));
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = gamma * mu_hat * b_beta * std::pow(rho, k);
    return p;
}

void TrainConfig::validate() const {
    if (epochs < 1 || matrices_per_epoch < 1 || instances_per_matrix < 1)
        throw std::invalid_argument("training counts must be positive");
    if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    instance.validate();
}

namespace {

// Plain gradient step with optional heavy-ball momentum; thresholds are
// projected back to [0, inf).
struct Updater {
    double lr;
    bool use_momentum;
    double momentum;

    void step(std::vector<Eigen::MatrixXd>& w, std::vector<Eigen::MatrixXd>& vel,
              const std::vector<Eigen::MatrixXd>& g, double scale) const {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (use_momentum) {
                vel[i] = momentum * vel[i] - lr * scale * g[i];
                w[i] += vel[i];
            } else {
                w[i] -= lr * scale * g[i];
            }
        }
    }
    void step(Eigen::VectorXd& w, Eigen::VectorXd& vel, const Eigen::VectorXd& g,
              double scale) const {
        if (use_momentum) {
            vel = momentum * vel - lr * scale * g;
            w += vel;
        } else {
            w -= lr * scale * g;
        }
        w = w.cwiseMax(0.0);
    }
};

std::vector<Eigen::MatrixXd> zeros_like(const std::vector<Eigen::MatrixXd>& w) {
    std::vector<Eigen::MatrixXd> z;
    z.reserve(w.size());
    for (const auto& m : w) z.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    return z;
}

constexpr std::uint64_t kFixedXTag = 0x5858ULL << 32;

// One X per (epoch, matrix index) in the varying regime; one X for the whole
// run when fixed.
std::vector<SparseInstance> make_training_batch(const TrainConfig& cfg, int epoch, int matrix_idx,
                                                const Eigen::MatrixXd* fixed_x) {
    const std::uint64_t batch_seed =
        derive_subseed(cfg.seed, static_cast<std::uint64_t>(epoch) * cfg.matrices_per_epoch +
                                     matrix_idx + 1);
    auto batch = sample_batch(cfg.instance, cfg.instances_per_matrix, batch_seed,
                              /*fixed_x=*/fixed_x == nullptr);
    if (fixed_x) {
        for (auto& inst : batch) {
            inst.X = *fixed_x;
            inst.y = inst.X * inst.beta_star;
        }
    }
    return batch;
}

} // namespace

Eigen::MatrixXd training_fixed_x(const TrainConfig& config) {
    return sample_instance(config.instance, derive_subseed(config.seed, kFixedXTag)).X;
}

namespace {

Eigen::MatrixXd draw_fixed_x(const TrainConfig& cfg) { return training_fixed_x(cfg); }

double average_lipschitz(const TrainConfig& cfg, const Eigen::MatrixXd* fixed_x) {
    if (fixed_x) return spectral_norm_sq(*fixed_x);
    double acc = 0.0;
    const int samples = 8;
    for (int i = 0; i < samples; ++i) {
        const auto inst = sample_instance(cfg.instance, derive_subseed(cfg.seed ^ 0x11F0, i));
        acc += spectral_norm_sq(inst.X);
    }
    return acc / samples;
}

void check_finite(double loss, int epoch) {
    if (!std::isfinite(loss)) throw TrainingError("training loss diverged", epoch);
}

} // namespace

ListaVmTrainResult meta_train_lista_vm(const TrainConfig& config, const EvalSets* eval) {
    config.validate();
    const std::optional<Eigen::MatrixXd> fixed =
        config.fixed_x ? std::optional<Eigen::MatrixXd>(draw_fixed_x(config)) : std::nullopt;
    const Eigen::MatrixXd* fixed_ptr = fixed ? &*fixed : nullptr;

    const int d = config.instance.d;
    const int m = 2 * config.instance.n_measurements + 1;
    const double lbar = average_lipschitz(config, fixed_ptr);

    ListaVmTrainResult result;
    auto& p = result.params;
    p.M.assign(config.layers, (m / lbar) * Eigen::MatrixXd::Identity(d, d));
    p.theta = Eigen::VectorXd::Constant(config.layers, config.alpha / lbar);

    Updater upd{config.learning_rate, config.use_momentum, config.momentum};
    auto vel_m = zeros_like(p.M);
    Eigen::VectorXd vel_t = Eigen::VectorXd::Zero(config.layers);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int j = 0; j < config.matrices_per_epoch; ++j) {
            const auto batch = make_training_batch(config, epoch, j, fixed_ptr);
            const auto g = grad_lista_vm(p, batch, kEmbeddingNormalizer, config.support_set);
            const double scale = 1.0 / batch.size();
            epoch_loss += g.loss * scale;
            check_finite(g.loss, epoch);
            upd.step(p.M, vel_m, g.M, scale);
            upd.step(p.theta, vel_t, g.theta, scale);
        }
        result.curve.train_loss.push_back(epoch_loss / config.matrices_per_epoch);
        if (eval) {
            result.curve.test_err_fixed_x.push_back(
                eval->fixed_x.empty() ? std::nan("")
                                      : mean_prediction_loss(p, eval->fixed_x, config.support_set));
            result.curve.test_err_varying_x.push_back(
                eval->varying_x.empty()
                    ? std::nan("")
                    : mean_prediction_loss(p, eval->varying_x, config.support_set));
        }
    }
    return result;
}

ListaCpTrainResult meta_train_lista_cp(const TrainConfig& config, const EvalSets* eval) {
    config.validate();
    const std::optional<Eigen::MatrixXd> fixed =
        config.fixed_x ? std::optional<Eigen::MatrixXd>(draw_fixed_x(config)) : std::nullopt;
    const Eigen::MatrixXd* fixed_ptr = fixed ? &*fixed : nullptr;

    const double lbar = average_lipschitz(config, fixed_ptr);
    const Eigen::MatrixXd x_init =
        fixed_ptr ? *fixed_ptr
                  : sample_instance(config.instance, derive_subseed(config.seed, kFixedXTag)).X;

    ListaCpTrainResult result;
    auto& p = result.params;
    p.D.assign(config.layers, x_init / lbar);
    p.theta = Eigen::VectorXd::Constant(config.layers, config.alpha / lbar);

    Updater upd{config.learning_rate, config.use_momentum, config.momentum};
    auto vel_d = zeros_like(p.D);
    Eigen::VectorXd vel_t = Eigen::VectorXd::Zero(config.layers);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int j = 0; j < config.matrices_per_epoch; ++j) {
            const auto batch = make_training_batch(config, epoch, j, fixed_ptr);
            const auto g = grad_lista_cp(p, batch);
            const double scale = 1.0 / batch.size();
            epoch_loss += g.loss * scale;
            check_finite(g.loss, epoch);
            upd.step(p.D, vel_d, g.D, scale);
            upd.step(p.theta, vel_t, g.theta, scale);
        }
        result.curve.train_loss.push_back(epoch_loss / config.matrices_per_epoch);
        if (eval) {
            result.curve.test_err_fixed_x.push_back(
                eval->fixed_x.empty() ? std::nan("") : mean_prediction_loss(p, eval->fixed_x));
            result.curve.test_err_varying_x.push_back(
                eval->varying_x.empty() ? std::nan("") : mean_prediction_loss(p, eval->varying_x));
        }
    }
    return result;
}

ListaTrainResult meta_train_lista(const TrainConfig& config, const EvalSets* eval) {
    config.validate();
    const std::optional<Eigen::MatrixXd> fixed =
        config.fixed_x ? std::optional<Eigen::MatrixXd>(draw_fixed_x(config)) : std::nullopt;
    const Eigen::MatrixXd* fixed_ptr = fixed ? &*fixed : nullptr;

    const int d = config.instance.d;
    const double lbar = average_lipschitz(config, fixed_ptr);
    const Eigen::MatrixXd x_init =
        fixed_ptr ? *fixed_ptr
                  : sample_instance(config.instance, derive_subseed(config.seed, kFixedXTag)).X;

    ListaTrainResult result;
    auto& p = result.params;
    p.W1.assign(config.layers, x_init.transpose() / lbar);
    p.W2.assign(config.layers,
                Eigen::MatrixXd::Identity(d, d) - (x_init.transpose() * x_init) / lbar);
    p.theta = Eigen::VectorXd::Constant(config.layers, config.alpha / lbar);

    Updater upd{config.learning_rate, config.use_momentum, config.momentum};
    auto vel_w1 = zeros_like(p.W1);
    auto vel_w2 = zeros_like(p.W2);
    Eigen::VectorXd vel_t = Eigen::VectorXd::Zero(config.layers);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int j = 0; j < config.matrices_per_epoch; ++j) {
            const auto batch = make_training_batch(config, epoch, j, fixed_ptr);
            const auto g = grad_lista(p, batch);
            const double scale = 1.0 / batch.size();
            epoch_loss += g.loss * scale;
            check_finite(g.loss, epoch);
            upd.step(p.W1, vel_w1, g.W1, scale);
            upd.step(p.W2, vel_w2, g.W2, scale);
            upd.step(p.theta, vel_t, g.theta, scale);
        }
        result.curve.train_loss.push_back(epoch_loss / config.matrices_per_epoch);
        if (eval) {
            result.curve.test_err_fixed_x.push_back(
                eval->fixed_x.empty() ? std::nan("") : mean_prediction_loss(p, eval->fixed_x));
            result.curve.test_err_varying_x.push_back(
                eval->varying_x.empty() ? std::nan("") : mean_prediction_loss(p, eval->varying_x));
        }
    }
    return result;
}

double mean_prediction_loss(const ListaVmParams& params, const std::vector<SparseInstance>& set,
                            const std::optional<std::vector<int>>& support) {
    double acc = 0.0;
    for (const auto& inst : set) {
        const auto trace = support
                               ? lista_vm_ss_forward(params, *support, inst.X, inst.y)
                               : lista_vm_forward(params, inst.X, inst.y);
        acc += (trace.final_beta() - inst.beta_star).squaredNorm();
    }
    return acc / set.size();
}

double mean_prediction_loss(const ListaCpParams& params, const std::vector<SparseInstance>& set) {
    double acc = 0.0;
    for (const auto& inst : set) {
        const auto trace = lista_cp_forward(params, inst.X, inst.y);
        acc += (trace.final_beta() - inst.beta_star).squaredNorm();
    }
    return acc / set.size();
}

double mean_prediction_loss(const ListaParams& params, const std::vector<SparseInstance>& set) {
    double acc = 0.0;
    for (const auto& inst : set) {
        const auto trace = lista_forward(params, inst.X, inst.y);
        acc += (trace.final_beta() - inst.beta_star).squaredNorm();
    }
    return acc / set.size();
}

void train_curve_to_csv(const TrainCurve& curve, std::ostream& out) {
    out << "epoch,train_loss,test_err_fixed_x,test_err_varying_x\n";
    char buf[160];
    for (std::size_t e = 0; e < curve.train_loss.size(); ++e) {
        const double fx = e < curve.test_err_fixed_x.size() ? curve.test_err_fixed_x[e]
                                                            : std::nan("");
        const double vx = e < curve.test_err_varying_x.size() ? curve.test_err_varying_x[e]
                                                              : std::nan("");
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e, curve.train_loss[e], fx, vx);
        out << buf;
    }
}

namespace {

void write_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

Eigen::MatrixXd read_matrix(ByteReader& r, Eigen::Index rows, Eigen::Index cols,
                            const char* field) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64(field);
    return m;
}

void write_header(ByteWriter& w, ModelKind kind, int layers) {
    w.u32(kParamsMagic);
    w.u32(kParamsVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u32(static_cast<std::uint32_t>(layers));
}

ByteReader open_params(const std::uint8_t* data, std::size_t size, ModelKind expected) {
    ByteReader r(data, size);
    if (r.u32("magic") != kParamsMagic) throw ParseError("bad magic", 0);
    if (r.u32("version") != kParamsVersion) throw ParseError("unsupported version", 4);
    if (r.u32("kind") != static_cast<std::uint32_t>(expected))
        throw ParseError("parameter kind mismatch", 8);
    return r;
}

} // namespace

std::vector<std::uint8_t> serialize_params(const ListaVmParams& p) {
    ByteWriter w;
    write_header(w, ModelKind::lista_vm, p.layers());
    w.u32(static_cast<std::uint32_t>(p.d()));
    for (const auto& m : p.M) write_matrix(w, m);
    for (int k = 0; k < p.layers(); ++k) w.f64(p.theta[k]);
    return w.take();
}

std::vector<std::uint8_t> serialize_params(const ListaCpParams& p) {
    ByteWriter w;
    write_header(w, ModelKind::lista_cp, p.layers());
    w.u32(static_cast<std::uint32_t>(p.D[0].rows()));
    w.u32(static_cast<std::uint32_t>(p.D[0].cols()));
    for (const auto& m : p.D) write_matrix(w, m);
    for (int k = 0; k < p.layers(); ++k) w.f64(p.theta[k]);
    return w.take();
}

std::vector<std::uint8_t> serialize_params(const ListaParams& p) {
    ByteWriter w;
    write_header(w, ModelKind::lista, p.layers());
    w.u32(static_cast<std::uint32_t>(p.W1[0].rows()));
    w.u32(static_cast<std::uint32_t>(p.W1[0].cols()));
    for (int k = 0; k < p.layers(); ++k) {
        write_matrix(w, p.W1[k]);
        write_matrix(w, p.W2[k]);
    }
    for (int k = 0; k < p.layers(); ++k) w.f64(p.theta[k]);
    return w.take();
}

ModelKind peek_params_kind(const std::uint8_t* data, std::size_t size) {
    ByteReader r(data, size);
    if (r.u32("magic") != kParamsMagic) throw ParseError("bad magic", 0);
    if (r.u32("version") != kParamsVersion) throw ParseError("unsupported version", 4);
    const std::uint32_t kind = r.u32("kind");
    if (kind > 2) throw ParseError("unknown parameter kind", 8);
    return static_cast<ModelKind>(kind);
}

ListaVmParams deserialize_lista_vm_params(const std::uint8_t* data, std::size_t size) {
    ByteReader r = open_params(data, size, ModelKind::lista_vm);
    const int layers = static_cast<int>(r.u32("layers"));
    const int d = static_cast<int>(r.u32("d"));
    if (layers < 1 || d < 1) r.fail("degenerate dimensions in header");
    ListaVmParams p;
    for (int k = 0; k < layers; ++k) p.M.push_back(read_matrix(r, d, d, "M"));
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = r.f64("theta");
    r.expect_end();
    return p;
}

ListaCpParams deserialize_lista_cp_params(const std::uint8_t* data, std::size_t size) {
    ByteReader r = open_params(data, size, ModelKind::lista_cp);
    const int layers = static_cast<int>(r.u32("layers"));
    const int n = static_cast<int>(r.u32("n"));
    const int d = static_cast<int>(r.u32("d"));
    if (layers < 1 || n < 1 || d < 1) r.fail("degenerate dimensions in header");
    ListaCpParams p;
    for (int k = 0; k < layers; ++k) p.D.push_back(read_matrix(r, n, d, "D"));
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = r.f64("theta");
    r.expect_end();
    return p;
}

ListaParams deserialize_lista_params(const std::uint8_t* data, std::size_t size) {
    ByteReader r = open_params(data, size, ModelKind::lista);
    const int layers = static_cast<int>(r.u32("layers"));
    const int d = static_cast<int>(r.u32("d"));
    const int n = static_cast<int>(r.u32("n"));
    if (layers < 1 || n < 1 || d < 1) r.fail("degenerate dimensions in header");
    ListaParams p;
    for (int k = 0; k < layers; ++k) {
        p.W1.push_back(read_matrix(r, d, n, "W1"));
        p.W2.push_back(read_matrix(r, d, d, "W2"));
    }
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = r.f64("theta");
    r.expect_end();
    return p;
}

} // namespace icl

