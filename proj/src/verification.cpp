#include "icl/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "icl/errors.hpp"
#include "icl/rng.hpp"
#include "icl/transformer.hpp"

namespace icl {

CoherenceStats coherence_stats(const Eigen::MatrixXd& X_prefix, const Eigen::MatrixXd& m_value,
                               double normalizer, const std::vector<int>& support) {
    if (X_prefix.rows() < 1) throw std::invalid_argument("coherence_stats: need rows");
    if (m_value.rows() != X_prefix.cols() || m_value.cols() != X_prefix.cols())
        throw std::invalid_argument("coherence_stats: M^V shape mismatch");
    if (normalizer <= 0) throw std::invalid_argument("coherence_stats: normalizer must be positive");

    const Eigen::MatrixXd D = (X_prefix * m_value.transpose()) / normalizer;
    const Eigen::MatrixXd G = D.transpose() * X_prefix; // G(i,j) = D_{:,i}^T X_{:,j}
    const Eigen::Index d = G.rows();

    CoherenceStats stats;
    stats.n = static_cast<int>(X_prefix.rows());
    stats.diag_min_all = G.diagonal().minCoeff();
    stats.diag_max_all = G.diagonal().maxCoeff();

    double mu = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            if (i != j) mu = std::max(mu, std::abs(G(i, j)));
    stats.mu_offdiag = mu;

    if (support.empty()) throw std::invalid_argument("coherence_stats: support must be nonempty");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i : support) {
        if (i < 0 || i >= d) throw std::invalid_argument("coherence_stats: support index range");
        const double v = std::abs(G(i, i));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    stats.sigma_min = lo;
    stats.sigma_max_diag = hi;
    return stats;
}

ConditionReport check_condition(const CoherenceStats& stats, double gamma, int sparsity) {
    ConditionReport report;
    report.lhs = gamma * (2.0 * sparsity - 1.0) * stats.mu_offdiag +
                 std::abs(1.0 - gamma * stats.sigma_min);
    const bool diag_ok =
        gamma * stats.diag_min_all >= 0.0 && gamma * stats.diag_max_all <= 1.0;
    report.passes = report.lhs <= 1.0 && diag_ok;
    constexpr double kRateCap = 50.0;
    report.implied_rate = report.lhs <= 0.0 ? kRateCap : std::min(kRateCap, -std::log(report.lhs));
    return report;
}

double check_equivalence(const SparseInstance& inst, int layers, double gamma,
                         const Eigen::VectorXd& theta_schedule, double sigma_d,
                         std::optional<double> gating_bound) {
    const int d = inst.d();
    const int N = inst.n();
    const auto weights =
        build_constructed_weights(d, layers, gamma, sigma_d, theta_schedule, gating_bound);
    const auto states = forward(weights, embed_instance(inst).H);

    ListaVmParams params = theory_params(d, sigma_d, gamma, 1.0, 1.0, 1.0, layers);
    params.theta = theta_schedule;

    double worst = 0.0;
    for (int n = 1; n <= N; ++n) {
        const auto trace =
            lista_vm_forward(params, inst.X.topRows(n), inst.y.head(n), 2 * n + 1);
        for (int k = 1; k <= layers; ++k) {
            const Eigen::VectorXd from_tf = extract_beta(states[k], d, n);
            const Eigen::VectorXd from_rec = trace.betas.row(k).transpose();
            worst = std::max(worst, (from_tf - from_rec).lpNorm<Eigen::Infinity>());
        }
    }
    return worst;
}

RateReport convergence_rate(const SolverTrace& trace, const Eigen::VectorXd& beta_star) {
    constexpr double kFloor = 1e-12;
    const int rows = static_cast<int>(trace.betas.rows());
    RateReport report;

    std::vector<double> ks, logs;
    for (int k = 0; k < rows; ++k) {
        const double err = (Eigen::VectorXd(trace.betas.row(k).transpose()) - beta_star).norm();
        if (err <= kFloor) {
            if (report.floor_k < 0) report.floor_k = k;
            break;
        }
        ks.push_back(static_cast<double>(k + 1)); // iterate index beta^(k+1)
        logs.push_back(std::log(err));
    }
    if (ks.size() < 4) {
        report.degenerate = true;
        return report;
    }
    const int m = static_cast<int>(ks.size());
    double kbar = 0.0, lbar = 0.0;
    for (int i = 0; i < m; ++i) {
        kbar += ks[i];
        lbar += logs[i];
    }
    kbar /= m;
    lbar /= m;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < m; ++i) {
        sxy += (ks[i] - kbar) * (logs[i] - lbar);
        sxx += (ks[i] - kbar) * (ks[i] - kbar);
        syy += (logs[i] - lbar) * (logs[i] - lbar);
    }
    report.slope = sxy / sxx;
    double ss_res = 0.0;
    for (int i = 0; i < m; ++i) {
        const double fit = lbar + report.slope * (ks[i] - kbar);
        ss_res += (logs[i] - fit) * (logs[i] - fit);
    }
    report.r2 = syy <= 1e-300 ? 1.0 : 1.0 - ss_res / syy;
    return report;
}

namespace {

ListaVmParams random_vm(int d, int layers, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.05, 0.3);
    ListaVmParams p;
    p.M.reserve(layers);
    for (int k = 0; k < layers; ++k) {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = 0.1 * gauss(rng);
        p.M.push_back(std::move(m));
    }
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = unif(rng);
    return p;
}

ListaCpParams random_cp(int n, int d, int layers, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.05, 0.3);
    ListaCpParams p;
    p.D.reserve(layers);
    for (int k = 0; k < layers; ++k) {
        Eigen::MatrixXd m(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = 0.08 * gauss(rng);
        p.D.push_back(std::move(m));
    }
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = unif(rng);
    return p;
}

ListaParams random_lista(int d, int n, int layers, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.05, 0.3);
    ListaParams p;
    for (int k = 0; k < layers; ++k) {
        Eigen::MatrixXd w1(d, n), w2(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < n; ++j) w1(i, j) = 0.15 * gauss(rng);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) w2(i, j) = 0.15 * gauss(rng);
        p.W1.push_back(std::move(w1));
        p.W2.push_back(std::move(w2));
    }
    p.theta.resize(layers);
    for (int k = 0; k < layers; ++k) p.theta[k] = unif(rng);
    return p;
}

// Smallest margin between any pre-activation and its threshold kink.
template <class Collect>
double kink_margin(const Collect& collect, const Eigen::VectorXd& theta) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < collect.size(); ++k)
        margin = std::min(margin,
                          (collect[k].array().abs() - theta[static_cast<int>(k)]).abs().minCoeff());
    return margin;
}

std::vector<Eigen::VectorXd> vm_preacts(const ListaVmParams& p, const SparseInstance& inst) {
    std::vector<Eigen::VectorXd> zs;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(inst.d());
    const double inv_m = 1.0 / (2.0 * inst.n() + 1.0);
    for (int k = 0; k < p.layers(); ++k) {
        zs.push_back(beta - p.M[k] * (inv_m * (inst.X.transpose() * (inst.X * beta - inst.y))));
        beta = soft_threshold(zs.back(), p.theta[k]);
    }
    return zs;
}

std::vector<Eigen::VectorXd> cp_preacts(const ListaCpParams& p, const SparseInstance& inst) {
    std::vector<Eigen::VectorXd> zs;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(inst.d());
    for (int k = 0; k < p.layers(); ++k) {
        zs.push_back(beta - p.D[k].transpose() * (inst.X * beta - inst.y));
        beta = soft_threshold(zs.back(), p.theta[k]);
    }
    return zs;
}

std::vector<Eigen::VectorXd> lista_preacts(const ListaParams& p, const SparseInstance& inst) {
    std::vector<Eigen::VectorXd> zs;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(inst.d());
    for (int k = 0; k < p.layers(); ++k) {
        zs.push_back(p.W1[k] * inst.y + p.W2[k] * beta);
        beta = soft_threshold(zs.back(), p.theta[k]);
    }
    return zs;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)});
}

} // namespace

FiniteDiffReport finite_diff_check(ModelKind kind, int layers, const InstanceConfig& config,
                                   std::uint64_t seed, int batch_size, double h) {
    constexpr double kKinkMargin = 1e-4;
    auto rng = make_engine(seed ^ 0xF1D0);

    const int d = config.d;
    const int n = config.n_measurements;

    FiniteDiffReport report;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const auto batch =
            sample_batch(config, batch_size, derive_subseed(seed, 1000 + attempt));

        if (kind == ModelKind::lista_vm) {
            const ListaVmParams p = random_vm(d, layers, rng);
            double margin = std::numeric_limits<double>::infinity();
            for (const auto& inst : batch)
                margin = std::min(margin, kink_margin(vm_preacts(p, inst), p.theta));
            if (margin < kKinkMargin) continue;

            const auto analytic = grad_lista_vm(p, batch);
            double worst = 0.0;
            auto loss_at = [&](const ListaVmParams& q) { return grad_lista_vm(q, batch).loss; };
            ListaVmParams q = p;
            for (int k = 0; k < layers; ++k) {
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) {
                        const double save = q.M[k](i, j);
                        q.M[k](i, j) = save + h;
                        const double fp = loss_at(q);
                        q.M[k](i, j) = save - h;
                        const double fm = loss_at(q);
                        q.M[k](i, j) = save;
                        worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.M[k](i, j)));
                    }
                const double save = q.theta[k];
                q.theta[k] = save + h;
                const double fp = loss_at(q);
                q.theta[k] = save - h;
                const double fm = loss_at(q);
                q.theta[k] = save;
                worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.theta[k]));
            }
            report.max_rel_err = worst;
            return report;
        }

        if (kind == ModelKind::lista_cp) {
            const ListaCpParams p = random_cp(n, d, layers, rng);
            double margin = std::numeric_limits<double>::infinity();
            for (const auto& inst : batch)
                margin = std::min(margin, kink_margin(cp_preacts(p, inst), p.theta));
            if (margin < kKinkMargin) continue;

            const auto analytic = grad_lista_cp(p, batch);
            double worst = 0.0;
            auto loss_at = [&](const ListaCpParams& q) { return grad_lista_cp(q, batch).loss; };
            ListaCpParams q = p;
            for (int k = 0; k < layers; ++k) {
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) {
                        const double save = q.D[k](i, j);
                        q.D[k](i, j) = save + h;
                        const double fp = loss_at(q);
                        q.D[k](i, j) = save - h;
                        const double fm = loss_at(q);
                        q.D[k](i, j) = save;
                        worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.D[k](i, j)));
                    }
                const double save = q.theta[k];
                q.theta[k] = save + h;
                const double fp = loss_at(q);
                q.theta[k] = save - h;
                const double fm = loss_at(q);
                q.theta[k] = save;
                worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.theta[k]));
            }
            report.max_rel_err = worst;
            return report;
        }

        const ListaParams p = random_lista(d, n, layers, rng);
        double margin = std::numeric_limits<double>::infinity();
        for (const auto& inst : batch)
            margin = std::min(margin, kink_margin(lista_preacts(p, inst), p.theta));
        if (margin < kKinkMargin) continue;

        const auto analytic = grad_lista(p, batch);
        double worst = 0.0;
        auto loss_at = [&](const ListaParams& q) { return grad_lista(q, batch).loss; };
        ListaParams q = p;
        for (int k = 0; k < layers; ++k) {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < n; ++j) {
                    const double save = q.W1[k](i, j);
                    q.W1[k](i, j) = save + h;
                    const double fp = loss_at(q);
                    q.W1[k](i, j) = save - h;
                    const double fm = loss_at(q);
                    q.W1[k](i, j) = save;
                    worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.W1[k](i, j)));
                }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const double save = q.W2[k](i, j);
                    q.W2[k](i, j) = save + h;
                    const double fp = loss_at(q);
                    q.W2[k](i, j) = save - h;
                    const double fm = loss_at(q);
                    q.W2[k](i, j) = save;
                    worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.W2[k](i, j)));
                }
            const double save = q.theta[k];
            q.theta[k] = save + h;
            const double fp = loss_at(q);
            q.theta[k] = save - h;
            const double fm = loss_at(q);
            q.theta[k] = save;
            worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic.theta[k]));
        }
        report.max_rel_err = worst;
        return report;
    }
    report.inconclusive = true;
    return report;
}

SupportVariantReport support_variant_check(const SparseInstance& inst,
                                           const std::vector<int>& support,
                                           const ListaVmParams& params) {
    SupportVariantReport report;
    const auto vm = lista_vm_forward(params, inst.X, inst.y);
    const auto ss = lista_vm_ss_forward(params, support, inst.X, inst.y);
    report.err_vm = (vm.final_beta() - inst.beta_star).norm();
    report.err_ss = (ss.final_beta() - inst.beta_star).norm();
    report.ratio = report.err_vm == 0.0 ? 1.0 : report.err_ss / report.err_vm;

    std::vector<bool> inside(inst.d(), false);
    for (int i : support) inside[i] = true;
    report.ss_zero_outside = true;
    for (Eigen::Index k = 0; k < ss.betas.rows(); ++k)
        for (int i = 0; i < inst.d(); ++i)
            if (!inside[i] && ss.betas(k, i) != 0.0) report.ss_zero_outside = false;
    return report;
}

void write_report_csv(const std::vector<CheckLine>& lines, std::ostream& out) {
    out << "name,passed,value,threshold,detail\n";
    char buf[64];
    for (const auto& line : lines) {
        out << line.name << "," << (line.passed ? 1 : 0);
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,", line.value, line.threshold);
        out << buf << line.detail << "\n";
    }
}

void write_report_text(const std::vector<CheckLine>& lines, std::ostream& out) {
    for (const auto& line : lines) {
        out << (line.passed ? "PASS" : "FAIL") << " " << line.name;
        if (!line.detail.empty()) out << ": " << line.detail;
        out << "\n";
    }
}

} // namespace icl
