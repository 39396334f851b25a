#include "icl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "icl/errors.hpp"
#include "icl/io.hpp"
#include "icl/rng.hpp"
#include "icl/solvers.hpp"
#include "icl/transformer.hpp"
#include "icl/verification.hpp"

namespace icl {

namespace {

const std::set<std::string> kExperiments = {"fig1a",          "fig1b",
                                            "fig1c",          "convergence_k",
                                            "coherence_decay", "meta_train_compare"};

const std::set<std::string> kSolverNames = {
    "ista",          "fista",         "lista_fixed",      "lista_cp_fixed", "lista_meta",
    "lista_cp_meta", "lista_vm_meta", "lista_vm_ss_meta", "lista_vm_theory"};

int scaled(int base, double desk_scale) {
    return std::max(1, static_cast<int>(std::lround(base * desk_scale)));
}

// Mean and standard error per x-index.
class SeriesAccumulator {
public:
    explicit SeriesAccumulator(std::size_t bins) : sum_(bins, 0.0), sumsq_(bins, 0.0), n_(0) {}
    void add(const std::vector<double>& values) {
        for (std::size_t i = 0; i < sum_.size(); ++i) {
            sum_[i] += values[i];
            sumsq_[i] += values[i] * values[i];
        }
        ++n_;
    }
    Curve finish(const std::string& name, const std::vector<double>& xs) const {
        Curve c{name, {}};
        for (std::size_t i = 0; i < sum_.size(); ++i) {
            const double mean = sum_[i] / n_;
            const double var = std::max(0.0, sumsq_[i] / n_ - mean * mean);
            const double se = n_ > 1 ? std::sqrt(var / (n_ - 1)) : 0.0;
            c.points.push_back(CurvePoint{xs[i], mean, se});
        }
        return c;
    }

private:
    std::vector<double> sum_, sumsq_;
    std::size_t n_;
};

std::vector<double> iota_xs(int count, double start = 0.0) {
    std::vector<double> xs(count);
    for (int i = 0; i < count; ++i) xs[i] = start + i;
    return xs;
}

// Per-iterate squared prediction errors ||beta^(k) - beta*||^2 for one trace.
std::vector<double> squared_errors(const SolverTrace& trace, const Eigen::VectorXd& beta_star) {
    std::vector<double> errs(trace.betas.rows());
    for (Eigen::Index k = 0; k < trace.betas.rows(); ++k)
        errs[k] = (Eigen::VectorXd(trace.betas.row(k).transpose()) - beta_star).squaredNorm();
    return errs;
}

using SolverFn = std::function<SolverTrace(const SparseInstance&)>;

struct PreparedSolver {
    std::string name;
    SolverFn run;
};

// Builds the runnable roster; learned entries are trained here, once.
std::vector<PreparedSolver> prepare_roster(const ExperimentConfig& config,
                                           const std::vector<int>& support) {
    std::vector<PreparedSolver> out;
    for (const auto& spec : config.roster) {
        if (!kSolverNames.count(spec.name))
            throw std::invalid_argument("unknown solver '" + spec.name + "'");
        TrainConfig tc = config.train;
        tc.instance = config.instance;
        tc.layers = spec.iterations;
        tc.alpha = spec.alpha;
        tc.seed = derive_subseed(config.seed, std::hash<std::string>{}(spec.name));

        if (spec.name == "ista") {
            out.push_back({spec.name, [spec](const SparseInstance& inst) {
                               return ista_solve({inst.X, inst.y, spec.alpha}, spec.iterations,
                                                 &inst.beta_star);
                           }});
        } else if (spec.name == "fista") {
            out.push_back({spec.name, [spec](const SparseInstance& inst) {
                               return fista_solve({inst.X, inst.y, spec.alpha}, spec.iterations,
                                                  &inst.beta_star);
                           }});
        } else if (spec.name == "lista_fixed" || spec.name == "lista_meta") {
            tc.fixed_x = spec.name == "lista_fixed";
            auto params = meta_train_lista(tc).params;
            out.push_back({spec.name, [params](const SparseInstance& inst) {
                               return lista_forward(params, inst.X, inst.y, &inst.beta_star);
                           }});
        } else if (spec.name == "lista_cp_fixed" || spec.name == "lista_cp_meta") {
            tc.fixed_x = spec.name == "lista_cp_fixed";
            auto params = meta_train_lista_cp(tc).params;
            out.push_back({spec.name, [params](const SparseInstance& inst) {
                               return lista_cp_forward(params, inst.X, inst.y, &inst.beta_star);
                           }});
        } else if (spec.name == "lista_vm_meta") {
            tc.fixed_x = false;
            auto params = meta_train_lista_vm(tc).params;
            out.push_back({spec.name, [params](const SparseInstance& inst) {
                               return lista_vm_forward(params, inst.X, inst.y,
                                                       kEmbeddingNormalizer, &inst.beta_star);
                           }});
        } else if (spec.name == "lista_vm_ss_meta") {
            if (support.empty())
                throw std::invalid_argument("lista_vm_ss_meta requires a support set");
            tc.fixed_x = false;
            tc.support_set = support;
            auto params = meta_train_lista_vm(tc).params;
            out.push_back({spec.name, [params, support](const SparseInstance& inst) {
                               return lista_vm_ss_forward(params, support, inst.X, inst.y,
                                                          kEmbeddingNormalizer, &inst.beta_star);
                           }});
        } else { // lista_vm_theory
            const double gamma = config.gamma > 0 ? config.gamma : 1.0;
            const double sigma_d =
                config.sigma_d > 0 ? config.sigma_d : std::sqrt(double(config.instance.d));
            const auto pilot = sample_instance(config.instance, derive_subseed(config.seed, 7));
            const auto stats =
                coherence_stats(pilot.X, (2.0 / (sigma_d * sigma_d)) *
                                             Eigen::MatrixXd::Identity(pilot.d(), pilot.d()),
                                2.0 * pilot.n() + 1.0, [&] {
                                    std::vector<int> all(pilot.d());
                                    for (int i = 0; i < pilot.d(); ++i) all[i] = i;
                                    return all;
                                }());
            const auto params = theory_params(config.instance.d, sigma_d, gamma,
                                              config.instance.resolved_beta_l1_bound(),
                                              stats.mu_offdiag, 0.8, spec.iterations);
            out.push_back({spec.name, [params](const SparseInstance& inst) {
                               return lista_vm_forward(params, inst.X, inst.y,
                                                       kEmbeddingNormalizer, &inst.beta_star);
                           }});
        }
    }
    return out;
}

struct OutputWriter {
    std::filesystem::path dir;
    Manifest manifest;

    void add(const std::string& filename) {
        manifest.files.push_back({filename, hash_file((dir / filename).string())});
    }

    void write_meta(const ExperimentConfig& config, const std::string& filename) {
        nlohmann::json meta = nlohmann::json::parse(experiment_config_to_json(config));
        meta["aggregation"] = "mean"; // per-instance losses are averaged, not medianed
        std::ofstream out(dir / filename, std::ios::binary);
        out << meta.dump(2) << "\n";
        if (!out.flush()) throw std::runtime_error("write failed for " + filename);
        add(filename);
    }

    void finish(const std::vector<std::pair<std::string, double>>& summary) {
        manifest.summary = summary;
        nlohmann::json j;
        j["files"] = nlohmann::json::array();
        for (const auto& f : manifest.files) j["files"].push_back({{"path", f.path}, {"hash", f.hash}});
        j["summary"] = nlohmann::json::object();
        for (const auto& [k, v] : summary) j["summary"][k] = v;
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        out << j.dump(2) << "\n";
        if (!out.flush()) throw std::runtime_error("write failed for manifest.json");
    }
};

Manifest run_fig1(const ExperimentConfig& config, bool restricted_support) {
    InstanceConfig inst_cfg = config.instance;
    std::vector<int> support;
    if (restricted_support) {
        if (!inst_cfg.support_set) {
            support.resize(inst_cfg.d / 2);
            for (std::size_t i = 0; i < support.size(); ++i) support[i] = static_cast<int>(i);
            inst_cfg.support_set = support;
        } else {
            support = *inst_cfg.support_set;
        }
    }
    ExperimentConfig cfg = config;
    cfg.instance = inst_cfg;

    const int n_test = scaled(500, config.desk_scale);
    const auto roster = prepare_roster(cfg, support);

    // Fixed-X evaluation reuses the X the fixed-regime solvers were trained on.
    auto fixed_sets = [&](const std::string& solver_name) {
        TrainConfig tc = cfg.train;
        tc.instance = inst_cfg;
        tc.seed = derive_subseed(cfg.seed, std::hash<std::string>{}(solver_name));
        const Eigen::MatrixXd x_train = training_fixed_x(tc);
        auto set = sample_batch(inst_cfg, n_test, derive_subseed(cfg.seed, 101));
        for (auto& inst : set) {
            inst.X = x_train;
            inst.y = inst.X * inst.beta_star;
        }
        return set;
    };
    const auto varying_set = sample_batch(inst_cfg, n_test, derive_subseed(cfg.seed, 102));

    std::vector<Curve> curves;
    std::vector<std::pair<std::string, double>> summary;

    for (std::size_t si = 0; si < roster.size(); ++si) {
        const auto& solver = roster[si];
        const int K = cfg.roster[si].iterations;
        const auto xs = iota_xs(K + 1);
        SeriesAccumulator vary_acc(K + 1);
        for (const auto& inst : varying_set) vary_acc.add(squared_errors(solver.run(inst), inst.beta_star));
        curves.push_back(vary_acc.finish(solver.name + "/varying_x", xs));
        summary.emplace_back(solver.name + "/varying_x_final", curves.back().points.back().value);

        const bool fixed_regime =
            solver.name == "lista_fixed" || solver.name == "lista_cp_fixed";
        if (!restricted_support) {
            SeriesAccumulator fixed_acc(K + 1);
            const auto fixed_set = fixed_sets(fixed_regime ? solver.name : "shared");
            for (const auto& inst : fixed_set)
                fixed_acc.add(squared_errors(solver.run(inst), inst.beta_star));
            curves.push_back(fixed_acc.finish(solver.name + "/fixed_x", xs));
            summary.emplace_back(solver.name + "/fixed_x_final", curves.back().points.back().value);
        }
    }

    OutputWriter writer{std::filesystem::path(config.output_dir), {}};
    std::filesystem::create_directories(writer.dir);
    const std::string base = restricted_support ? "fig1b" : "fig1a";
    emit_csv(curves, (writer.dir / (base + ".csv")).string());
    writer.add(base + ".csv");
    emit_svg(curves, (writer.dir / (base + ".svg")).string(),
             SvgOptions{restricted_support ? "Support-restricted sparse recovery"
                                           : "Sparse recovery across solvers",
                        "iteration k", "mean ||beta - beta*||^2", false, true});
    writer.add(base + ".svg");
    writer.write_meta(config, base + ".meta.json");
    writer.finish(summary);
    return writer.manifest;
}

Manifest run_fig1c(const ExperimentConfig& config) {
    InstanceConfig inst_cfg = config.instance;
    const int d = inst_cfg.d;
    const int N = inst_cfg.n_measurements;
    const double gamma = config.gamma > 0 ? config.gamma : 1.5;
    const double sigma_d = config.sigma_d > 0 ? config.sigma_d : std::sqrt(double(d));
    const int layers = config.roster.empty() ? 12 : config.roster.front().iterations;
    const int n_seeds = config.seeds > 0 ? config.seeds : scaled(50, config.desk_scale);

    std::vector<int> sweep = config.sweep;
    if (sweep.empty()) {
        for (int n = std::max(4, N / 32); n <= N; n *= 2) sweep.push_back(n);
        if (sweep.empty() || sweep.back() != N) sweep.push_back(N);
    }
    for (int n : sweep)
        if (n < 1 || n > N) throw std::invalid_argument("sweep entry out of range");

    // Threshold schedule from a pilot instance's coherence at the smallest
    // swept prefix.
    const auto pilot = sample_instance(inst_cfg, derive_subseed(config.seed, 7));
    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;
    const Eigen::MatrixXd m_value =
        (2.0 / (sigma_d * sigma_d)) * Eigen::MatrixXd::Identity(d, d);
    const auto stats = coherence_stats(pilot.X.topRows(sweep.front()), m_value,
                                       2.0 * sweep.front() + 1.0, all);
    const auto params = theory_params(d, sigma_d, gamma, inst_cfg.resolved_beta_l1_bound(),
                                      stats.mu_offdiag, 0.8, layers);

    SeriesAccumulator lin_acc(sweep.size()), qry_acc(sweep.size());
    for (int s = 0; s < n_seeds; ++s) {
        const auto inst = sample_instance(inst_cfg, derive_subseed(config.seed, 1000 + s));
        // beta trace per prefix via the certified-equivalent recursion, then
        // the real two-head averaging layer on the assembled output sequence.
        Eigen::MatrixXd H_last = embed_instance(inst).H;
        for (int n = 1; n <= N; ++n) {
            const auto trace = lista_vm_forward(params, inst.X.topRows(n), inst.y.head(n),
                                                2 * n + 1);
            H_last.col(2 * n).segment(d + 1, d) = trace.final_beta();
        }
        const Eigen::MatrixXd H_avg = final_average_layer(H_last, d);
        const Eigen::VectorXd v = linear_readout_spec(d).v;

        std::vector<double> lin(sweep.size()), qry(sweep.size());
        for (std::size_t i = 0; i < sweep.size(); ++i) {
            const int n = sweep[i];
            const double y_true = n == N ? inst.y_query : inst.y[n];
            lin[i] = std::abs(y_true - readout_linear(H_avg, v, 2 * n));
            qry[i] = std::abs(y_true - readout_query(H_last, inst, n + 1));
        }
        lin_acc.add(lin);
        qry_acc.add(qry);
    }

    std::vector<double> xs(sweep.begin(), sweep.end());
    std::vector<Curve> curves{qry_acc.finish("query_readout", xs),
                              lin_acc.finish("linear_readout", xs)};

    std::vector<std::pair<std::string, double>> summary;
    const double gap_first = curves[1].points.front().value - curves[0].points.front().value;
    const double gap_last = curves[1].points.back().value - curves[0].points.back().value;
    summary.emplace_back("gap_at_min_n", gap_first);
    summary.emplace_back("gap_at_max_n", gap_last);
    summary.emplace_back("gap_ratio", gap_first != 0.0 ? gap_last / gap_first : 0.0);

    OutputWriter writer{std::filesystem::path(config.output_dir), {}};
    std::filesystem::create_directories(writer.dir);
    emit_csv(curves, (writer.dir / "fig1c.csv").string());
    writer.add("fig1c.csv");
    emit_svg(curves, (writer.dir / "fig1c.svg").string(),
             SvgOptions{"Label prediction error by read-out", "prefix length n",
                        "mean |y - yhat|", true, true});
    writer.add("fig1c.svg");
    writer.write_meta(config, "fig1c.meta.json");
    writer.finish(summary);
    return writer.manifest;
}

Manifest run_convergence_k(const ExperimentConfig& config) {
    InstanceConfig inst_cfg = config.instance;
    const int d = inst_cfg.d;
    const double gamma = config.gamma > 0 ? config.gamma : 1.2;
    const double sigma_d = config.sigma_d > 0 ? config.sigma_d : std::sqrt(1.5);
    const int layers = config.roster.empty() ? 12 : config.roster.front().iterations;
    const int want = config.seeds > 0 ? config.seeds : scaled(200, config.desk_scale);

    const Eigen::MatrixXd m_value =
        (2.0 / (sigma_d * sigma_d)) * Eigen::MatrixXd::Identity(d, d);
    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;

    std::vector<std::vector<double>> log_errs;
    double min_rate = std::numeric_limits<double>::infinity();
    int attempts = 0, accepted = 0, violations = 0;
    while (accepted < want && attempts < 20 * want) {
        const auto inst = sample_instance(inst_cfg, derive_subseed(config.seed, attempts++));
        std::vector<int> true_support;
        for (int i = 0; i < d; ++i)
            if (inst.beta_star[i] != 0.0) true_support.push_back(i);
        auto stats = coherence_stats(inst.X, m_value, 2.0 * inst.n() + 1.0, true_support);
        const auto report = check_condition(stats, gamma, inst_cfg.sparsity);
        if (!report.passes) continue;
        ++accepted;
        min_rate = std::min(min_rate, report.implied_rate);

        auto params = theory_params(d, sigma_d, gamma, inst.beta_star.lpNorm<1>(),
                                    stats.mu_offdiag, std::exp(-report.implied_rate), layers);
        const auto trace = lista_vm_forward(params, inst.X, inst.y, kEmbeddingNormalizer,
                                            &inst.beta_star);

        // Per-iterate contraction inequality in l1.
        for (int k = 0; k < layers; ++k) {
            const double ek = (Eigen::VectorXd(trace.betas.row(k).transpose()) - inst.beta_star)
                                  .lpNorm<1>();
            const double ek1 =
                (Eigen::VectorXd(trace.betas.row(k + 1).transpose()) - inst.beta_star).lpNorm<1>();
            const double bound = report.lhs * ek + inst_cfg.sparsity * params.theta[k];
            if (ek1 > bound * (1.0 + 1e-12) + 1e-15) ++violations;
        }

        std::vector<double> logs(layers + 1);
        for (int k = 0; k <= layers; ++k) {
            const double err =
                (Eigen::VectorXd(trace.betas.row(k).transpose()) - inst.beta_star).norm();
            logs[k] = std::log(std::max(err, 1e-12));
        }
        log_errs.push_back(std::move(logs));
    }
    if (accepted == 0) throw NumericError("no condition-passing instances found");

    const int layers_pts = layers + 1;
    Curve curve{"lista_vm_theory", {}};
    std::vector<double> mean_logs(layers_pts, 0.0);
    for (const auto& logs : log_errs)
        for (int k = 0; k < layers_pts; ++k) mean_logs[k] += logs[k];
    for (int k = 0; k < layers_pts; ++k) {
        mean_logs[k] /= accepted;
        curve.points.push_back(CurvePoint{double(k + 1), std::exp(mean_logs[k]), 0.0});
    }

    // Aggregate rate fit on the mean-log curve.
    double kbar = 0, lbar = 0;
    for (int k = 0; k < layers_pts; ++k) {
        kbar += k + 1;
        lbar += mean_logs[k];
    }
    kbar /= layers_pts;
    lbar /= layers_pts;
    double sxy = 0, sxx = 0, syy = 0;
    for (int k = 0; k < layers_pts; ++k) {
        sxy += (k + 1 - kbar) * (mean_logs[k] - lbar);
        sxx += (k + 1 - kbar) * (k + 1 - kbar);
        syy += (mean_logs[k] - lbar) * (mean_logs[k] - lbar);
    }
    const double slope = sxy / sxx;
    double ss_res = 0;
    for (int k = 0; k < layers_pts; ++k) {
        const double fit = lbar + slope * (k + 1 - kbar);
        ss_res += (mean_logs[k] - fit) * (mean_logs[k] - fit);
    }
    const double r2 = syy <= 1e-300 ? 1.0 : 1.0 - ss_res / syy;

    OutputWriter writer{std::filesystem::path(config.output_dir), {}};
    std::filesystem::create_directories(writer.dir);
    emit_csv({curve}, (writer.dir / "convergence_k.csv").string());
    writer.add("convergence_k.csv");
    emit_svg({curve}, (writer.dir / "convergence_k.svg").string(),
             SvgOptions{"Theory-parameter convergence", "iterate k", "geometric mean error",
                        false, true});
    writer.add("convergence_k.svg");
    writer.write_meta(config, "convergence_k.meta.json");
    writer.finish({{"instances", double(accepted)},
                   {"inequality_violations", double(violations)},
                   {"min_implied_rate", min_rate},
                   {"aggregate_slope", slope},
                   {"aggregate_r2", r2}});
    return writer.manifest;
}

Manifest run_coherence_decay(const ExperimentConfig& config) {
    InstanceConfig inst_cfg = config.instance;
    const int d = inst_cfg.d;
    const int n_seeds = config.seeds > 0 ? config.seeds : scaled(200, config.desk_scale);
    std::vector<int> sweep = config.sweep;
    if (sweep.empty())
        for (int n = 50; n <= 3200; n *= 2) sweep.push_back(n);

    const Eigen::MatrixXd m_value = 2.0 * Eigen::MatrixXd::Identity(d, d);
    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;

    Curve curve{"mu_offdiag_median", {}};
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const int n = sweep[i];
        InstanceConfig cfg_n = inst_cfg;
        cfg_n.n_measurements = n;
        std::vector<double> mus(n_seeds);
        for (int s = 0; s < n_seeds; ++s) {
            const auto inst =
                sample_instance(cfg_n, derive_subseed(config.seed, 10000 * (i + 1) + s));
            mus[s] = coherence_stats(inst.X, m_value, 2.0 * n + 1.0, all).mu_offdiag;
        }
        std::nth_element(mus.begin(), mus.begin() + n_seeds / 2, mus.end());
        curve.points.push_back(CurvePoint{double(n), mus[n_seeds / 2], 0.0});
    }

    // Log-log slope of the medians.
    const int m = static_cast<int>(curve.points.size());
    double xbar = 0, ybar = 0;
    for (const auto& p : curve.points) {
        xbar += std::log(p.x);
        ybar += std::log(p.value);
    }
    xbar /= m;
    ybar /= m;
    double sxy = 0, sxx = 0;
    for (const auto& p : curve.points) {
        sxy += (std::log(p.x) - xbar) * (std::log(p.value) - ybar);
        sxx += (std::log(p.x) - xbar) * (std::log(p.x) - xbar);
    }
    const double slope = sxy / sxx;

    OutputWriter writer{std::filesystem::path(config.output_dir), {}};
    std::filesystem::create_directories(writer.dir);
    emit_csv({curve}, (writer.dir / "coherence_decay.csv").string());
    writer.add("coherence_decay.csv");
    emit_svg({curve}, (writer.dir / "coherence_decay.svg").string(),
             SvgOptions{"Off-diagonal coherence decay", "rows n", "median mu_offdiag", true,
                        true});
    writer.add("coherence_decay.svg");
    writer.write_meta(config, "coherence_decay.meta.json");
    writer.finish({{"loglog_slope", slope}});
    return writer.manifest;
}

Manifest run_meta_train_compare(const ExperimentConfig& config) {
    const int n_test = scaled(200, config.desk_scale);
    EvalSets eval;
    eval.varying_x = sample_batch(config.instance, n_test, derive_subseed(config.seed, 102));

    TrainConfig tc = config.train;
    tc.instance = config.instance;
    tc.fixed_x = false;

    std::vector<Curve> curves;
    std::vector<std::pair<std::string, double>> summary;
    auto push = [&](const std::string& name, const TrainCurve& trained) {
        Curve err{name + "/test_err_varying_x", {}};
        Curve loss{name + "/train_loss", {}};
        for (std::size_t e = 0; e < trained.train_loss.size(); ++e) {
            err.points.push_back(CurvePoint{double(e), trained.test_err_varying_x[e], 0.0});
            loss.points.push_back(CurvePoint{double(e), trained.train_loss[e], 0.0});
        }
        curves.push_back(std::move(err));
        curves.push_back(std::move(loss));
        summary.emplace_back(name + "/final_test_err", trained.test_err_varying_x.back());
    };

    tc.seed = derive_subseed(config.seed, std::hash<std::string>{}("lista_meta"));
    push("lista_meta", meta_train_lista(tc, &eval).curve);
    tc.seed = derive_subseed(config.seed, std::hash<std::string>{}("lista_cp_meta"));
    push("lista_cp_meta", meta_train_lista_cp(tc, &eval).curve);
    tc.seed = derive_subseed(config.seed, std::hash<std::string>{}("lista_vm_meta"));
    push("lista_vm_meta", meta_train_lista_vm(tc, &eval).curve);

    OutputWriter writer{std::filesystem::path(config.output_dir), {}};
    std::filesystem::create_directories(writer.dir);
    emit_csv(curves, (writer.dir / "meta_train_compare.csv").string());
    writer.add("meta_train_compare.csv");
    emit_svg(curves, (writer.dir / "meta_train_compare.svg").string(),
             SvgOptions{"Meta-training comparison", "epoch", "loss", false, true});
    writer.add("meta_train_compare.svg");
    writer.write_meta(config, "meta_train_compare.meta.json");
    writer.finish(summary);
    return writer.manifest;
}

} // namespace

void ExperimentConfig::validate() const {
    if (!kExperiments.count(experiment))
        throw std::invalid_argument("unknown experiment '" + experiment + "'");
    instance.validate();
    if (roster.empty()) throw std::invalid_argument("solver roster must be nonempty");
    for (const auto& s : roster) {
        if (!kSolverNames.count(s.name))
            throw std::invalid_argument("unknown solver '" + s.name + "'");
        if (s.iterations < 1) throw std::invalid_argument("solver iterations must be >= 1");
        if (s.alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
    }
    if (desk_scale <= 0) throw std::invalid_argument("desk_scale must be positive");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    try {
        ExperimentConfig cfg;
        cfg.experiment = j.at("experiment").get<std::string>();
        if (j.contains("instance")) {
            const auto& ji = j["instance"];
            if (ji.contains("d")) cfg.instance.d = ji["d"].get<int>();
            if (ji.contains("n_measurements"))
                cfg.instance.n_measurements = ji["n_measurements"].get<int>();
            if (ji.contains("sparsity")) cfg.instance.sparsity = ji["sparsity"].get<int>();
            if (ji.contains("support_set"))
                cfg.instance.support_set = ji["support_set"].get<std::vector<int>>();
            if (ji.contains("noise_std")) cfg.instance.noise_std = ji["noise_std"].get<double>();
            if (ji.contains("x_variances")) {
                const auto v = ji["x_variances"].get<std::vector<double>>();
                cfg.instance.x_variances = Eigen::Map<const Eigen::VectorXd>(
                    v.data(), static_cast<Eigen::Index>(v.size()));
            }
            if (ji.contains("beta_l1_bound"))
                cfg.instance.beta_l1_bound = ji["beta_l1_bound"].get<double>();
            if (ji.contains("x_norm_bound"))
                cfg.instance.x_norm_bound = ji["x_norm_bound"].get<double>();
        }
        if (j.contains("roster"))
            for (const auto& js : j["roster"]) {
                SolverSpec s;
                s.name = js.at("name").get<std::string>();
                if (js.contains("alpha")) s.alpha = js["alpha"].get<double>();
                if (js.contains("iterations")) s.iterations = js["iterations"].get<int>();
                cfg.roster.push_back(std::move(s));
            }
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("desk_scale")) cfg.desk_scale = j["desk_scale"].get<double>();
        if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
        if (j.contains("sigma_d")) cfg.sigma_d = j["sigma_d"].get<double>();
        if (j.contains("sweep")) cfg.sweep = j["sweep"].get<std::vector<int>>();
        if (j.contains("train")) {
            const auto& jt = j["train"];
            if (jt.contains("epochs")) cfg.train.epochs = jt["epochs"].get<int>();
            if (jt.contains("matrices_per_epoch"))
                cfg.train.matrices_per_epoch = jt["matrices_per_epoch"].get<int>();
            if (jt.contains("instances_per_matrix"))
                cfg.train.instances_per_matrix = jt["instances_per_matrix"].get<int>();
            if (jt.contains("learning_rate"))
                cfg.train.learning_rate = jt["learning_rate"].get<double>();
            if (jt.contains("momentum")) cfg.train.use_momentum = jt["momentum"].get<bool>();
        }
        if (cfg.roster.empty()) {
            // Experiment-appropriate default rosters.
            auto add = [&](const char* n) { cfg.roster.push_back(SolverSpec{n, 0.1, 12}); };
            if (cfg.experiment == "fig1a") {
                add("ista");
                add("fista");
                add("lista_cp_fixed");
                add("lista_cp_meta");
                add("lista_vm_meta");
            } else if (cfg.experiment == "fig1b") {
                add("lista_vm_meta");
                add("lista_vm_ss_meta");
            } else {
                add("lista_vm_theory");
            }
        }
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config error: ") + e.what());
    }
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["experiment"] = config.experiment;
    nlohmann::json ji;
    ji["d"] = config.instance.d;
    ji["n_measurements"] = config.instance.n_measurements;
    ji["sparsity"] = config.instance.sparsity;
    if (config.instance.support_set) ji["support_set"] = *config.instance.support_set;
    ji["noise_std"] = config.instance.noise_std;
    if (config.instance.x_variances.size() != 0)
        ji["x_variances"] = std::vector<double>(config.instance.x_variances.begin(),
                                                config.instance.x_variances.end());
    j["instance"] = ji;
    j["roster"] = nlohmann::json::array();
    for (const auto& s : config.roster)
        j["roster"].push_back({{"name", s.name}, {"alpha", s.alpha}, {"iterations", s.iterations}});
    j["seeds"] = config.seeds;
    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    j["desk_scale"] = config.desk_scale;
    if (config.gamma > 0) j["gamma"] = config.gamma;
    if (config.sigma_d > 0) j["sigma_d"] = config.sigma_d;
    if (!config.sweep.empty()) j["sweep"] = config.sweep;
    j["train"] = {{"epochs", config.train.epochs},
                  {"matrices_per_epoch", config.train.matrices_per_epoch},
                  {"instances_per_matrix", config.train.instances_per_matrix},
                  {"learning_rate", config.train.learning_rate},
                  {"momentum", config.train.use_momentum}};
    return j.dump();
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(content.data(), content.size())));
    return buf;
}

Manifest run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment == "fig1a") return run_fig1(config, false);
    if (config.experiment == "fig1b") return run_fig1(config, true);
    if (config.experiment == "fig1c") return run_fig1c(config);
    if (config.experiment == "convergence_k") return run_convergence_k(config);
    if (config.experiment == "coherence_decay") return run_coherence_decay(config);
    return run_meta_train_compare(config);
}

} // namespace icl
