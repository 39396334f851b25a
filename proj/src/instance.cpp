#include "icl/instance.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "icl/io.hpp"
#include "icl/rng.hpp"

namespace icl {

namespace {

constexpr std::uint32_t kInstanceMagic = 0x494C4349; // "ICLI"
constexpr std::uint32_t kInstanceVersion = 1;

Eigen::VectorXd sample_row(std::mt19937_64& rng, const Eigen::VectorXd& sigma) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd x(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) x[i] = sigma[i] * gauss(rng);
    return x;
}

Eigen::VectorXd sample_sparse_beta(std::mt19937_64& rng, int d, int sparsity,
                                   const std::vector<int>& pool) {
    // Uniformly random S-subset via partial Fisher-Yates, values standard normal.
    std::vector<int> idx = pool;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < sparsity; ++k) {
        std::uniform_int_distribution<int> pick(k, static_cast<int>(idx.size()) - 1);
        std::swap(idx[k], idx[pick(rng)]);
        beta[idx[k]] = gauss(rng);
    }
    return beta;
}

} // namespace

void InstanceConfig::validate() const {
    if (d < 1) throw std::invalid_argument("d must be positive");
    if (n_measurements < 1) throw std::invalid_argument("n_measurements must be positive");
    if (sparsity < 0 || sparsity > d) throw std::invalid_argument("sparsity out of range");
    if (support_set) {
        if (support_set->empty()) throw std::invalid_argument("support_set must be nonempty");
        if (sparsity < 1) throw std::invalid_argument("sparsity must be >= 1 with a support set");
        if (sparsity > static_cast<int>(support_set->size()))
            throw std::invalid_argument("sparsity exceeds support set size");
        for (int i : *support_set)
            if (i < 0 || i >= d) throw std::invalid_argument("support index out of range");
    }
    if (noise_std < 0) throw std::invalid_argument("noise_std must be nonnegative");
    if (x_variances.size() != 0) {
        if (x_variances.size() != d) throw std::invalid_argument("x_variances size mismatch");
        if ((x_variances.array() <= 0.0).any())
            throw std::invalid_argument("x_variances must be positive");
    }
}

Eigen::VectorXd InstanceConfig::resolved_variances() const {
    if (x_variances.size() != 0) return x_variances;
    return Eigen::VectorXd::Ones(d);
}

double InstanceConfig::resolved_beta_l1_bound() const {
    // N(0,1) nonzeros: 4 sigma per active coordinate covers the batch sizes used here.
    if (beta_l1_bound > 0) return beta_l1_bound;
    return 4.0 * std::max(1, sparsity);
}

double InstanceConfig::resolved_x_norm_bound() const {
    if (x_norm_bound > 0) return x_norm_bound;
    const Eigen::VectorXd v = resolved_variances();
    return std::sqrt(v.sum()) + 4.0 * std::sqrt(v.maxCoeff());
}

SparseInstance sample_instance(const InstanceConfig& config, std::uint64_t seed) {
    config.validate();
    auto rng = make_engine(seed);

    const int d = config.d;
    const int n = config.n_measurements;
    const Eigen::VectorXd sigma = config.resolved_variances().cwiseSqrt();

    SparseInstance inst;
    inst.X.resize(n, d);
    for (int r = 0; r < n; ++r) inst.X.row(r) = sample_row(rng, sigma).transpose();

    std::vector<int> pool;
    if (config.support_set) {
        pool = *config.support_set;
        std::sort(pool.begin(), pool.end());
    } else {
        pool.resize(d);
        for (int i = 0; i < d; ++i) pool[i] = i;
    }
    inst.beta_star = sample_sparse_beta(rng, d, config.sparsity, pool);

    inst.x_query = sample_row(rng, sigma);

    inst.y = inst.X * inst.beta_star;
    if (config.noise_std > 0) {
        std::normal_distribution<double> gauss(0.0, config.noise_std);
        for (int r = 0; r < n; ++r) inst.y[r] += gauss(rng);
    }
    inst.y_query = inst.x_query.dot(inst.beta_star);
    return inst;
}

std::vector<SparseInstance> sample_batch(const InstanceConfig& config, int count,
                                         std::uint64_t seed, bool fixed_x) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    std::vector<SparseInstance> batch;
    batch.reserve(count);
    for (int i = 0; i < count; ++i)
        batch.push_back(sample_instance(config, derive_subseed(seed, i)));
    if (fixed_x) {
        // Shared measurement matrix drawn from a reserved sub-stream.
        const SparseInstance shared =
            sample_instance(config, derive_subseed(seed, 0x5858ULL << 32));
        for (int i = 0; i < count; ++i) {
            auto& inst = batch[i];
            inst.X = shared.X;
            inst.y = inst.X * inst.beta_star;
            if (config.noise_std > 0) {
                auto rng = make_engine(derive_subseed(seed, i) ^ 0xA5A5A5A5ULL);
                std::normal_distribution<double> gauss(0.0, config.noise_std);
                for (int r = 0; r < inst.n(); ++r) inst.y[r] += gauss(rng);
            }
        }
    }
    return batch;
}

std::vector<std::uint8_t> serialize_instance(const SparseInstance& inst) {
    ByteWriter w;
    w.u32(kInstanceMagic);
    w.u32(kInstanceVersion);
    const int n = inst.n(), d = inst.d();
    w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(n));
    w.u32(static_cast<std::uint32_t>((inst.beta_star.array() != 0.0).count()));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) w.f64(inst.X(r, c));
    for (int c = 0; c < d; ++c) w.f64(inst.beta_star[c]);
    for (int r = 0; r < n; ++r) w.f64(inst.y[r]);
    for (int c = 0; c < d; ++c) w.f64(inst.x_query[c]);
    w.f64(inst.y_query);
    return w.take();
}

SparseInstance deserialize_instance(const std::uint8_t* data, std::size_t size) {
    ByteReader r(data, size);
    if (r.u32("magic") != kInstanceMagic) throw ParseError("bad magic", 0);
    if (r.u32("version") != kInstanceVersion) throw ParseError("unsupported version", 4);
    const std::uint32_t d = r.u32("d");
    const std::uint32_t n = r.u32("n");
    const std::uint32_t s = r.u32("s");
    if (d == 0 || n == 0) r.fail("degenerate dimensions in header");
    if (s > d) r.fail("sparsity exceeds dimension");
    const std::size_t need = (static_cast<std::size_t>(n) * d + 2 * d + n + 1) * 8;
    if (r.remaining() != need)
        throw ParseError("payload size does not match header dimensions", r.offset());

    SparseInstance inst;
    inst.X.resize(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j) inst.X(i, j) = r.f64("X");
    inst.beta_star.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) inst.beta_star[j] = r.f64("beta_star");
    inst.y.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) inst.y[i] = r.f64("y");
    inst.x_query.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) inst.x_query[j] = r.f64("x_query");
    inst.y_query = r.f64("y_query");
    r.expect_end();
    return inst;
}

SparseInstance deserialize_instance(const std::vector<std::uint8_t>& bytes) {
    return deserialize_instance(bytes.data(), bytes.size());
}

std::string instance_to_json(const SparseInstance& inst) {
    nlohmann::json j;
    j["d"] = inst.d();
    j["n"] = inst.n();
    j["s"] = (inst.beta_star.array() != 0.0).count();
    auto rows = nlohmann::json::array();
    for (int r = 0; r < inst.n(); ++r) {
        auto row = nlohmann::json::array();
        for (int c = 0; c < inst.d(); ++c) row.push_back(inst.X(r, c));
        rows.push_back(std::move(row));
    }
    j["x"] = std::move(rows);
    j["beta_star"] = std::vector<double>(inst.beta_star.begin(), inst.beta_star.end());
    j["y"] = std::vector<double>(inst.y.begin(), inst.y.end());
    j["x_query"] = std::vector<double>(inst.x_query.begin(), inst.x_query.end());
    j["y_query"] = inst.y_query;
    return j.dump(2);
}

SparseInstance instance_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    try {
        const int d = j.at("d").get<int>();
        const int n = j.at("n").get<int>();
        SparseInstance inst;
        inst.X.resize(n, d);
        const auto& rows = j.at("x");
        if (static_cast<int>(rows.size()) != n) throw ParseError("x row count mismatch", 0);
        for (int r = 0; r < n; ++r) {
            if (static_cast<int>(rows[r].size()) != d) throw ParseError("x column count mismatch", 0);
            for (int c = 0; c < d; ++c) inst.X(r, c) = rows[r][c].get<double>();
        }
        auto vec = [&](const char* key, int len) {
            const auto v = j.at(key).get<std::vector<double>>();
            if (static_cast<int>(v.size()) != len)
                throw ParseError(std::string(key) + " length mismatch", 0);
            return Eigen::Map<const Eigen::VectorXd>(v.data(), len).eval();
        };
        inst.beta_star = vec("beta_star", d);
        inst.y = vec("y", n);
        inst.x_query = vec("x_query", d);
        inst.y_query = j.at("y_query").get<double>();
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what(), 0);
    }
}

} // namespace icl
