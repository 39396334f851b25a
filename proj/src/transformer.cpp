#include "icl/transformer.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "icl/errors.hpp"
#include "icl/io.hpp"
#include "icl/learned.hpp"

namespace icl {

namespace {

constexpr std::uint32_t kWeightsMagic = 0x574C4349; // "ICLW"
constexpr std::uint32_t kWeightsVersion = 1;

void check_square(const Eigen::MatrixXd& m, Eigen::Index dim, const char* name) {
    if (m.rows() != dim || m.cols() != dim)
        throw std::invalid_argument(std::string(name) + " must be " + std::to_string(dim) + "x" +
                                    std::to_string(dim));
}

} // namespace

Eigen::MatrixXd masked_attention(const Eigen::MatrixXd& H,
                                 const std::vector<AttentionHead>& heads) {
    const Eigen::Index D = H.rows();
    const Eigen::Index T = H.cols();
    if (T < 1) throw std::invalid_argument("masked_attention: need at least one token");
    Eigen::MatrixXd out = H;
    for (const auto& head : heads) {
        check_square(head.Q, D, "Q");
        check_square(head.K, D, "K");
        check_square(head.V, D, "V");
        // scores(i, j) = relu(<K h_i, Q h_j>), then column j keeps keys i <= j
        // scaled by 1/(j+1).
        Eigen::MatrixXd scores = ((head.K * H).transpose() * (head.Q * H)).cwiseMax(0.0);
        for (Eigen::Index j = 0; j < T; ++j) {
            scores.col(j).head(j + 1) /= static_cast<double>(j + 1);
            scores.col(j).tail(T - j - 1).setZero();
        }
        out.noalias() += (head.V * H) * scores;
    }
    return out;
}

Eigen::MatrixXd mlp_apply(const Eigen::MatrixXd& H, const MlpWeights& mlp) {
    if (mlp.W1.cols() != H.rows() || mlp.W2.rows() != H.rows() ||
        mlp.W2.cols() != mlp.W1.rows() || mlp.b.size() != mlp.W1.rows())
        throw std::invalid_argument("mlp_apply: weight shapes disagree with input");
    return H + mlp.W2 * ((mlp.W1 * H).colwise() + mlp.b).cwiseMax(0.0);
}

EmbeddingSequence embed_instance(const SparseInstance& inst) {
    const int d = inst.d();
    const int N = inst.n();
    EmbeddingSequence seq;
    seq.d = d;
    seq.N = N;
    seq.H = Eigen::MatrixXd::Zero(2 * d + 2, 2 * N + 1);
    for (int i = 0; i < N; ++i) {
        seq.H.col(2 * i).head(d) = inst.X.row(i).transpose();
        seq.H(2 * d + 1, 2 * i) = 1.0;
        seq.H.col(2 * i + 1).head(d) = inst.X.row(i).transpose();
        seq.H(d, 2 * i + 1) = inst.y[i];
    }
    seq.H.col(2 * N).head(d) = inst.x_query;
    seq.H(2 * d + 1, 2 * N) = 1.0;
    return seq;
}

TransformerWeights build_constructed_weights(int d, int layers, double gamma, double sigma_d,
                                             const Eigen::VectorXd& theta_schedule,
                                             std::optional<double> gating_bound,
                                             std::optional<double> x_norm_bound,
                                             std::optional<double> beta_l1_bound) {
    if (!(gamma > 0.0 && gamma <= 1.5))
        throw std::invalid_argument("build_constructed_weights: gamma must lie in (0, 1.5]");
    if (sigma_d <= 0) throw std::invalid_argument("sigma_d must be positive");
    if (d < 1 || layers < 1) throw std::invalid_argument("d and layers must be positive");
    if (theta_schedule.size() != layers)
        throw std::invalid_argument("theta schedule length must equal the layer count");
    if ((theta_schedule.array() < 0).any())
        throw std::invalid_argument("thresholds must be nonnegative");

    const int D = 2 * d + 2;
    const Eigen::MatrixXd m_value = (2.0 / (sigma_d * sigma_d)) * Eigen::MatrixXd::Identity(d, d);

    double B;
    if (gating_bound) {
        B = *gating_bound;
    } else {
        const double bx = x_norm_bound ? *x_norm_bound : std::sqrt(double(d)) + 4.0;
        const double bb = beta_l1_bound ? *beta_l1_bound : 2.0 * std::sqrt(double(d));
        const double m_norm = m_value.operatorNorm();
        const double c_beta = 1.0 + bx * bx * d * gamma * m_norm + bb * bx * gamma * m_norm;
        B = bb * bx + bx * std::sqrt(double(d)) * (bb + std::pow(c_beta, layers));
        if (!std::isfinite(B) || B > 1e300)
            throw NumericError(
                "constructed gating bound overflows at this depth; pass an explicit bound "
                "(e.g. from empirical_gating_bound)");
    }

    TransformerWeights w;
    w.d = d;
    w.meta.gamma = Eigen::VectorXd::Constant(layers, gamma);
    w.meta.m_value = m_value;
    w.meta.theta = theta_schedule;
    w.meta.gating_bound = B;

    // Shared MLP skeleton: W1 stacks +/- the beta-slot selector four times,
    // W2 = [-I, I, I, -I]; the per-layer bias puts -theta on the beta rows of
    // the third and fourth blocks, realizing S_theta on the beta slot.
    Eigen::MatrixXd w_sub = Eigen::MatrixXd::Zero(D, D);
    w_sub.block(d + 1, d + 1, d, d).setIdentity();
    Eigen::MatrixXd w1(4 * D, D);
    w1 << w_sub, -w_sub, w_sub, -w_sub;
    Eigen::MatrixXd w2(D, 4 * D);
    w2 << -Eigen::MatrixXd::Identity(D, D), Eigen::MatrixXd::Identity(D, D),
        Eigen::MatrixXd::Identity(D, D), -Eigen::MatrixXd::Identity(D, D);

    for (int k = 0; k < layers; ++k) {
        TransformerLayer layer;
        for (int h = 0; h < 4; ++h) {
            layer.heads[h].Q = Eigen::MatrixXd::Zero(D, D);
            layer.heads[h].K = Eigen::MatrixXd::Zero(D, D);
            layer.heads[h].V = Eigen::MatrixXd::Zero(D, D);
        }
        auto& plus1 = layer.heads[0];
        auto& minus1 = layer.heads[1];
        auto& plus2 = layer.heads[2];
        auto& minus2 = layer.heads[3];

        // Heads +/-1: score beta^T x, gated by -B on flagged (odd) keys.
        plus1.Q.block(d + 1, d + 1, d, d) = -Eigen::MatrixXd::Identity(d, d);
        minus1.Q.block(d + 1, d + 1, d, d) = Eigen::MatrixXd::Identity(d, d);
        plus1.Q(2 * d + 1, 2 * d + 1) = -B;
        minus1.Q(2 * d + 1, 2 * d + 1) = -B;
        plus1.K.block(d + 1, 0, d, d).setIdentity();
        minus1.K.block(d + 1, 0, d, d).setIdentity();
        plus1.K(2 * d + 1, 2 * d + 1) = 1.0;
        minus1.K(2 * d + 1, 2 * d + 1) = 1.0;
        plus1.V.block(d + 1, 0, d, d) = gamma * m_value;
        minus1.V.block(d + 1, 0, d, d) = -gamma * m_value;

        // Heads +/-2: score is the key's label, query side carries the flag.
        plus2.Q(d, 2 * d + 1) = 1.0;
        minus2.Q(d, 2 * d + 1) = -1.0;
        plus2.K(d, d) = 1.0;
        minus2.K(d, d) = 1.0;
        plus2.V.block(d + 1, 0, d, d) = gamma * m_value;
        minus2.V.block(d + 1, 0, d, d) = -gamma * m_value;

        layer.mlp.W1 = w1;
        layer.mlp.W2 = w2;
        layer.mlp.b = Eigen::VectorXd::Zero(4 * D);
        layer.mlp.b.segment(2 * D + d + 1, d).setConstant(-theta_schedule[k]);
        layer.mlp.b.segment(3 * D + d + 1, d).setConstant(-theta_schedule[k]);

        w.layers.push_back(std::move(layer));
    }
    return w;
}

double empirical_gating_bound(int layers, double gamma, double sigma_d,
                              const Eigen::VectorXd& theta_schedule,
                              const std::vector<SparseInstance>& pilot) {
    if (pilot.empty()) throw std::invalid_argument("pilot batch must be nonempty");
    double peak = 0.0;
    for (const auto& inst : pilot) {
        ListaVmParams sched;
        sched.M.assign(layers, (gamma * 2.0 / (sigma_d * sigma_d)) *
                                   Eigen::MatrixXd::Identity(inst.d(), inst.d()));
        sched.theta = theta_schedule;
        for (int n = 1; n <= inst.n(); ++n) {
            const auto trace =
                lista_vm_forward(sched, inst.X.topRows(n), inst.y.head(n), 2 * n + 1);
            for (int k = 0; k <= layers; ++k) {
                const Eigen::VectorXd beta = trace.betas.row(k);
                peak = std::max(peak, (inst.X.topRows(std::min(n + 1, inst.n())) * beta)
                                          .cwiseAbs()
                                          .maxCoeff());
                peak = std::max(peak, std::abs(inst.x_query.dot(beta)));
            }
        }
    }
    return 10.0 * peak;
}

std::vector<Eigen::MatrixXd> forward(const TransformerWeights& weights,
                                     const Eigen::MatrixXd& H1) {
    if (H1.rows() != weights.width())
        throw std::invalid_argument("forward: embedding width disagrees with the weights");
    std::vector<Eigen::MatrixXd> states;
    states.reserve(weights.depth() + 1);
    states.push_back(H1);
    for (int k = 0; k < weights.depth(); ++k) {
        const auto& layer = weights.layers[k];
        const std::vector<AttentionHead> heads(layer.heads.begin(), layer.heads.end());
        Eigen::MatrixXd next = mlp_apply(masked_attention(states.back(), heads), layer.mlp);
        if (!next.allFinite())
            throw NumericError("non-finite hidden state after layer " + std::to_string(k + 1));
        states.push_back(std::move(next));
    }
    return states;
}

Eigen::VectorXd extract_beta(const Eigen::MatrixXd& H, int d, int n) {
    const int col = 2 * n;
    if (H.rows() != 2 * d + 2) throw std::invalid_argument("extract_beta: width mismatch");
    if (n < 0 || col >= H.cols())
        throw std::out_of_range("extract_beta: prefix index out of range");
    return H.col(col).segment(d + 1, d);
}

double readout_query(const Eigen::MatrixXd& H_last, const SparseInstance& inst, int n) {
    if (n < 1 || n > inst.n() + 1)
        throw std::out_of_range("readout_query: row index out of range");
    const Eigen::VectorXd x = n == inst.n() + 1
                                  ? inst.x_query
                                  : Eigen::VectorXd(inst.X.row(n - 1).transpose());
    return x.dot(extract_beta(H_last, inst.d(), n - 1));
}

Eigen::MatrixXd final_average_layer(const Eigen::MatrixXd& H_last, int d) {
    const int D = 2 * d + 2;
    if (H_last.rows() != D) throw std::invalid_argument("final_average_layer: width mismatch");
    std::vector<AttentionHead> heads(2);
    for (auto& h : heads) {
        h.Q = Eigen::MatrixXd::Zero(D, D);
        h.K = Eigen::MatrixXd::Zero(D, D);
        h.V = Eigen::MatrixXd::Zero(D, D);
    }
    // Query carries +/- x in the beta slot, key carries beta, value writes 2x
    // the key's flag into the label slot.
    heads[0].Q.block(d + 1, 0, d, d).setIdentity();
    heads[1].Q.block(d + 1, 0, d, d) = -Eigen::MatrixXd::Identity(d, d);
    heads[0].K.block(d + 1, d + 1, d, d).setIdentity();
    heads[1].K.block(d + 1, d + 1, d, d).setIdentity();
    heads[0].V(d, 2 * d + 1) = 2.0;
    heads[1].V(d, 2 * d + 1) = -2.0;
    return masked_attention(H_last, heads);
}

double readout_linear(const Eigen::MatrixXd& H, const Eigen::VectorXd& v, int column) {
    if (v.size() != H.rows()) throw std::invalid_argument("readout_linear: vector size mismatch");
    if (column < 0 || column >= H.cols())
        throw std::out_of_range("readout_linear: column out of range");
    return v.dot(H.col(column));
}

ReadOutSpec linear_readout_spec(int d) {
    ReadOutSpec spec;
    spec.kind = ReadOutSpec::Kind::linear;
    spec.v = Eigen::VectorXd::Zero(2 * d + 2);
    spec.v[d] = 1.0;
    return spec;
}

ReadOutSpec query_readout_spec(int d) {
    ReadOutSpec spec;
    spec.kind = ReadOutSpec::Kind::query;
    spec.V = Eigen::MatrixXd::Zero(2 * d + 2, d);
    spec.V.block(d + 1, 0, d, d).setIdentity();
    return spec;
}

void dump_hidden_states(const std::vector<Eigen::MatrixXd>& states, std::ostream& out) {
    out << "layer,column,coordinate,value\n";
    char buf[64];
    for (std::size_t layer = 0; layer < states.size(); ++layer) {
        const auto& H = states[layer];
        for (Eigen::Index c = 0; c < H.cols(); ++c)
            for (Eigen::Index r = 0; r < H.rows(); ++r) {
                std::snprintf(buf, sizeof(buf), "%zu,%ld,%ld,%.17g\n", layer, long(c), long(r),
                              H(r, c));
                out << buf;
            }
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

} // namespace

std::vector<std::uint8_t> serialize_weights(const TransformerWeights& weights) {
    ByteWriter w;
    w.u32(kWeightsMagic);
    w.u32(kWeightsVersion);
    w.u32(static_cast<std::uint32_t>(weights.d));
    w.u32(static_cast<std::uint32_t>(weights.depth()));
    const int D = weights.width();
    for (const auto& layer : weights.layers) {
        for (std::uint32_t h = 0; h < 4; ++h) {
            w.u32(h); // head tag in the fixed order +1, -1, +2, -2
            write_matrix(w, layer.heads[h].Q);
            write_matrix(w, layer.heads[h].K);
            write_matrix(w, layer.heads[h].V);
        }
        write_matrix(w, layer.mlp.W1);
        write_matrix(w, layer.mlp.W2);
        for (Eigen::Index i = 0; i < 4 * D; ++i) w.f64(layer.mlp.b[i]);
    }
    for (int k = 0; k < weights.depth(); ++k) w.f64(weights.meta.gamma[k]);
    for (int k = 0; k < weights.depth(); ++k) w.f64(weights.meta.theta[k]);
    write_matrix(w, weights.meta.m_value);
    w.f64(weights.meta.gating_bound);
    return w.take();
}

TransformerWeights deserialize_weights(const std::uint8_t* data, std::size_t size) {
    ByteReader r(data, size);
    if (r.u32("magic") != kWeightsMagic) throw ParseError("bad magic", 0);
    if (r.u32("version") != kWeightsVersion) throw ParseError("unsupported version", 4);
    const int d = static_cast<int>(r.u32("d"));
    const int depth = static_cast<int>(r.u32("layers"));
    if (d < 1 || depth < 1) r.fail("degenerate dimensions in header");
    const int D = 2 * d + 2;

    TransformerWeights w;
    w.d = d;
    for (int k = 0; k < depth; ++k) {
        TransformerLayer layer;
        for (int h = 0; h < 4; ++h) {
            if (r.u32("head tag") != static_cast<std::uint32_t>(h))
                r.fail("unexpected head tag");
            layer.heads[h].Q = read_matrix(r, D, D, "Q");
            layer.heads[h].K = read_matrix(r, D, D, "K");
            layer.heads[h].V = read_matrix(r, D, D, "V");
        }
        layer.mlp.W1 = read_matrix(r, 4 * D, D, "W1");
        layer.mlp.W2 = read_matrix(r, D, 4 * D, "W2");
        layer.mlp.b.resize(4 * D);
        for (int i = 0; i < 4 * D; ++i) layer.mlp.b[i] = r.f64("b");
        w.layers.push_back(std::move(layer));
    }
    w.meta.gamma.resize(depth);
    for (int k = 0; k < depth; ++k) w.meta.gamma[k] = r.f64("gamma");
    w.meta.theta.resize(depth);
    for (int k = 0; k < depth; ++k) w.meta.theta[k] = r.f64("theta");
    w.meta.m_value = read_matrix(r, d, d, "M_V");
    w.meta.gating_bound = r.f64("B");
    r.expect_end();
    return w;
}

} // namespace icl
