#include "rcd/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace rcd {

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;
using ConstVMap = Eigen::Map<const VectorXd>;
using MutVMap = Eigen::Map<VectorXd>;

constexpr char kMagic[8] = {'R', 'C', 'D', 'D', 'E', 'N', 'O', 'I'};
constexpr std::uint32_t kFormatVersion = 1;

/// Offsets of one expert's tensors inside a flat parameter block.
struct ExpertLayout {
    Index w_in, b_in;
    std::vector<Index> w_res, b_res;
    Index w_out, b_out;
    Index size;

    explicit ExpertLayout(const DenoiserArchitecture& a) {
        const Index H = a.hidden_width, I = a.input_dim(), d = a.data_dim;
        Index p = 0;
        w_in = p;
        p += H * I;
        b_in = p;
        p += H;
        for (Index l = 1; l < a.hidden_layers; ++l) {
            w_res.push_back(p);
            p += H * H;
            b_res.push_back(p);
            p += H;
        }
        w_out = p;
        p += d * H;
        b_out = p;
        p += d;
        size = p;
    }
};

struct GateLayout {
    Index w1, b1, w2, b2, size;
    explicit GateLayout(const DenoiserArchitecture& a) {
        const Index G = a.gate_hidden, C = a.context_dim;
        w1 = 0;
        b1 = G * C;
        w2 = b1 + G;
        b2 = w2 + G;
        size = b2 + 1;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd silu(const MatrixXd& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

MatrixXd silu_grad(const MatrixXd& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

MatrixXd expert_forward(const DenoiserArchitecture& a, const double* block, const MatrixXd& input,
                        std::vector<MatrixXd>* pre) {
    const ExpertLayout L(a);
    const Index H = a.hidden_width, I = a.input_dim(), d = a.data_dim;
    MatrixXd h = ConstMap(block + L.w_in, H, I) * input;
    h.colwise() += ConstVMap(block + L.b_in, H);
    if (pre) pre->push_back(h);
    for (std::size_t l = 0; l < L.w_res.size(); ++l) {
        MatrixXd next = ConstMap(block + L.w_res[l], H, H) * silu(h);
        next.colwise() += ConstVMap(block + L.b_res[l], H);
        h += next;
        if (pre) pre->push_back(h);
    }
    MatrixXd out = ConstMap(block + L.w_out, d, H) * silu(h);
    out.colwise() += ConstVMap(block + L.b_out, d);
    return out;
}

void expert_backward(const DenoiserArchitecture& a, const double* block, double* grad, const MatrixXd& input,
                     const std::vector<MatrixXd>& pre, const MatrixXd& d_out) {
    const ExpertLayout L(a);
    const Index H = a.hidden_width, I = a.input_dim(), d = a.data_dim;
    const MatrixXd a_last = silu(pre.back());
    MutMap(grad + L.w_out, d, H) += d_out * a_last.transpose();
    MutVMap(grad + L.b_out, d) += d_out.rowwise().sum();
    MatrixXd dh = (ConstMap(block + L.w_out, d, H).transpose() * d_out).cwiseProduct(silu_grad(pre.back()));
    for (std::size_t l = L.w_res.size(); l-- > 0;) {
        const MatrixXd& h_prev = pre[l];
        MutMap(grad + L.w_res[l], H, H) += dh * silu(h_prev).transpose();
        MutVMap(grad + L.b_res[l], H) += dh.rowwise().sum();
        dh += (ConstMap(block + L.w_res[l], H, H).transpose() * dh).cwiseProduct(silu_grad(h_prev));
    }
    MutMap(grad + L.w_in, H, I) += dh * input.transpose();
    MutVMap(grad + L.b_in, H) += dh.rowwise().sum();
}

MatrixXd standardize_rows(const MatrixXd& m, const VectorXd& mean, const VectorXd& std) {
    return ((m.colwise() - mean).array().colwise() / std.array()).matrix();
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw InputError("denoiser blob truncated");
    return v;
}

void write_vec(std::ofstream& out, const VectorXd& v) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

VectorXd read_vec(std::ifstream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw InputError("denoiser blob corrupt (vector length)");
    VectorXd v(static_cast<Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
    if (!in) throw InputError("denoiser blob truncated");
    return v;
}

}  // namespace

Index DenoiserArchitecture::expert_size() const { return ExpertLayout(*this).size; }
Index DenoiserArchitecture::gate_size() const { return GateLayout(*this).size; }

void DenoiserArchitecture::validate() const {
    if (data_dim < 1) throw InputError("denoiser: data_dim must be >= 1");
    if (context_dim < 0) throw InputError("denoiser: context_dim must be >= 0");
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) throw InputError("denoiser: time_embed_dim must be even and >= 2");
    if (hidden_width < 1 || hidden_layers < 1 || gate_hidden < 1) throw InputError("denoiser: invalid layer sizes");
}

bool operator==(const DenoiserArchitecture& a, const DenoiserArchitecture& b) {
    return a.data_dim == b.data_dim && a.context_dim == b.context_dim && a.time_embed_dim == b.time_embed_dim &&
           a.hidden_width == b.hidden_width && a.hidden_layers == b.hidden_layers && a.gate_hidden == b.gate_hidden;
}

DenoiserParams DenoiserParams::zeros(const DenoiserArchitecture& arch) {
    arch.validate();
    DenoiserParams p;
    p.arch = arch;
    p.theta = VectorXd::Zero(arch.total_size());
    p.x_mean = VectorXd::Zero(arch.data_dim);
    p.x_std = VectorXd::Ones(arch.data_dim);
    p.z_mean = VectorXd::Zero(arch.context_dim);
    p.z_std = VectorXd::Ones(arch.context_dim);
    return p;
}

DenoiserParams DenoiserParams::initialize(const DenoiserArchitecture& arch, std::uint64_t seed) {
    DenoiserParams p = zeros(arch);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto fill = [&](double* ptr, Index count, double scale) {
        for (Index i = 0; i < count; ++i) ptr[i] = scale * n01(rng);
    };
    const ExpertLayout L(arch);
    const Index H = arch.hidden_width, I = arch.input_dim(), d = arch.data_dim;
    const double res_scale = 1.0 / std::sqrt(static_cast<double>(arch.hidden_layers));
    for (int e = 0; e < 2; ++e) {
        double* block = p.theta.data() + e * L.size;
        fill(block + L.w_in, H * I, std::sqrt(1.0 / static_cast<double>(I)));
        for (Index w : L.w_res) fill(block + w, H * H, res_scale * std::sqrt(1.0 / static_cast<double>(H)));
        fill(block + L.w_out, d * H, std::sqrt(1.0 / static_cast<double>(H)));
    }
    const GateLayout G(arch);
    double* gate = p.theta.data() + 2 * L.size;
    if (arch.context_dim > 0)
        fill(gate + G.w1, arch.gate_hidden * arch.context_dim, std::sqrt(1.0 / static_cast<double>(arch.context_dim)));
    fill(gate + G.w2, arch.gate_hidden, 0.1 * std::sqrt(1.0 / static_cast<double>(arch.gate_hidden)));
    return p;
}

bool DenoiserParams::finite() const { return theta.allFinite(); }

MatrixXd step_embedding(const std::vector<int>& steps, Index dim) {
    const Index half = dim / 2;
    MatrixXd out(dim, static_cast<Index>(steps.size()));
    for (std::size_t b = 0; b < steps.size(); ++b) {
        for (Index k = 0; k < half; ++k) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
            const double arg = static_cast<double>(steps[b]) * freq;
            out(k, static_cast<Index>(b)) = std::sin(arg);
            out(half + k, static_cast<Index>(b)) = std::cos(arg);
        }
    }
    return out;
}

MatrixXd moe_denoise(const DenoiserParams& params, const MatrixXd& x, const std::vector<int>& steps,
                     const MatrixXd& z, std::optional<double> gate_override, DenoiserTape* tape) {
    const auto& a = params.arch;
    const Index B = x.cols();
    if (x.rows() != a.data_dim || z.rows() != a.context_dim || z.cols() != B ||
        static_cast<Index>(steps.size()) != B)
        throw InputError("moe_denoise: dimension mismatch");

    DenoiserTape local;
    DenoiserTape& tp = tape ? *tape : local;
    tp = DenoiserTape{};
    tp.z_norm = standardize_rows(z, params.z_mean, params.z_std);
    tp.input.resize(a.input_dim(), B);
    tp.input.topRows(a.data_dim) = x;
    tp.input.middleRows(a.data_dim, a.time_embed_dim) = step_embedding(steps, a.time_embed_dim);
    tp.input.bottomRows(a.context_dim) = tp.z_norm;

    const Index esize = a.expert_size();
    tp.base_out = expert_forward(a, params.theta.data(), tp.input, &tp.base_pre);
    tp.crisis_out = expert_forward(a, params.theta.data() + esize, tp.input, &tp.crisis_pre);

    if (gate_override) {
        tp.gate = Eigen::RowVectorXd::Constant(B, *gate_override);
    } else {
        const GateLayout G(a);
        const double* gate = params.theta.data() + 2 * esize;
        tp.gate_pre = ConstMap(gate + G.w1, a.gate_hidden, a.context_dim) * tp.z_norm;
        tp.gate_pre.colwise() += ConstVMap(gate + G.b1, a.gate_hidden);
        const Eigen::RowVectorXd logit =
            (ConstVMap(gate + G.w2, a.gate_hidden).transpose() * silu(tp.gate_pre)).array() + gate[G.b2];
        tp.gate = logit.unaryExpr([](double v) { return sigmoid(v); });
    }
    tp.output = tp.base_out + (tp.crisis_out - tp.base_out) * tp.gate.asDiagonal();
    // exact endpoints of the convex combination
    for (Index b = 0; b < B; ++b) {
        if (tp.gate(b) == 0.0) tp.output.col(b) = tp.base_out.col(b);
        else if (tp.gate(b) == 1.0) tp.output.col(b) = tp.crisis_out.col(b);
        else if (tp.gate(b) == 0.5) tp.output.col(b) = 0.5 * (tp.base_out.col(b) + tp.crisis_out.col(b));
    }
    return tp.output;
}

VectorXd moe_denoise(const DenoiserParams& params, const VectorXd& x, int step, const VectorXd& z,
                     std::optional<double> gate_override) {
    return moe_denoise(params, MatrixXd(x), std::vector<int>{step}, MatrixXd(z), gate_override).col(0);
}

std::pair<MatrixXd, MatrixXd> expert_outputs(const DenoiserParams& params, const MatrixXd& x,
                                             const std::vector<int>& steps, const MatrixXd& z) {
    DenoiserTape tape;
    moe_denoise(params, x, steps, z, 0.0, &tape);
    return {tape.base_out, tape.crisis_out};
}

Eigen::RowVectorXd gate_values(const DenoiserParams& params, const MatrixXd& z) {
    const auto& a = params.arch;
    const GateLayout G(a);
    const double* gate = params.theta.data() + 2 * a.expert_size();
    const MatrixXd zn = standardize_rows(z, params.z_mean, params.z_std);
    MatrixXd pre = ConstMap(gate + G.w1, a.gate_hidden, a.context_dim) * zn;
    pre.colwise() += ConstVMap(gate + G.b1, a.gate_hidden);
    const Eigen::RowVectorXd logit = (ConstVMap(gate + G.w2, a.gate_hidden).transpose() * silu(pre)).array() + gate[G.b2];
    return logit.unaryExpr([](double v) { return sigmoid(v); });
}

VectorXd denoiser_backward(const DenoiserParams& params, const DenoiserTape& tape, const MatrixXd& d_output) {
    const auto& a = params.arch;
    const Index esize = a.expert_size();
    VectorXd grad = VectorXd::Zero(params.theta.size());
    const MatrixXd d_base = d_output * (1.0 - tape.gate.array()).matrix().asDiagonal();
    const MatrixXd d_crisis = d_output * tape.gate.asDiagonal();
    expert_backward(a, params.theta.data(), grad.data(), tape.input, tape.base_pre, d_base);
    expert_backward(a, params.theta.data() + esize, grad.data() + esize, tape.input, tape.crisis_pre, d_crisis);

    if (tape.gate_pre.size() > 0) {
        const GateLayout G(a);
        const double* gate = params.theta.data() + 2 * esize;
        double* ggrad = grad.data() + 2 * esize;
        const Eigen::RowVectorXd d_g = (d_output.cwiseProduct(tape.crisis_out - tape.base_out)).colwise().sum();
        const Eigen::RowVectorXd d_logit = d_g.cwiseProduct(tape.gate.cwiseProduct((1.0 - tape.gate.array()).matrix()));
        const MatrixXd act = silu(tape.gate_pre);
        MutVMap(ggrad + G.w2, a.gate_hidden) += act * d_logit.transpose();
        ggrad[G.b2] += d_logit.sum();
        const MatrixXd d_pre =
            (ConstVMap(gate + G.w2, a.gate_hidden) * d_logit).cwiseProduct(silu_grad(tape.gate_pre));
        MutMap(ggrad + G.w1, a.gate_hidden, a.context_dim) += d_pre * tape.z_norm.transpose();
        MutVMap(ggrad + G.b1, a.gate_hidden) += d_pre.rowwise().sum();
    }
    return grad;
}

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kFormatVersion);
    const auto& a = params.arch;
    for (Index v : {a.data_dim, a.context_dim, a.time_embed_dim, a.hidden_width, a.hidden_layers, a.gate_hidden})
        write_pod<std::int64_t>(out, static_cast<std::int64_t>(v));
    write_vec(out, params.theta);
    write_vec(out, params.x_mean);
    write_vec(out, params.x_std);
    write_vec(out, params.z_mean);
    write_vec(out, params.z_std);
}

DenoiserParams load_denoiser(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InputError("not a denoiser blob: " + path.string());
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kFormatVersion) throw InputError("unsupported denoiser blob version " + std::to_string(version));
    DenoiserParams p;
    p.arch.data_dim = read_pod<std::int64_t>(in);
    p.arch.context_dim = read_pod<std::int64_t>(in);
    p.arch.time_embed_dim = read_pod<std::int64_t>(in);
    p.arch.hidden_width = read_pod<std::int64_t>(in);
    p.arch.hidden_layers = read_pod<std::int64_t>(in);
    p.arch.gate_hidden = read_pod<std::int64_t>(in);
    p.arch.validate();
    p.theta = read_vec(in);
    p.x_mean = read_vec(in);
    p.x_std = read_vec(in);
    p.z_mean = read_vec(in);
    p.z_std = read_vec(in);
    if (p.theta.size() != p.arch.total_size() || p.x_mean.size() != p.arch.data_dim ||
        p.x_std.size() != p.arch.data_dim || p.z_mean.size() != p.arch.context_dim ||
        p.z_std.size() != p.arch.context_dim)
        throw InputError("denoiser blob inconsistent with its architecture: " + path.string());
    return p;
}

}  // namespace rcd
