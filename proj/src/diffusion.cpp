#include "rcd/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

namespace rcd {

namespace {

constexpr Index kSampleChunk = 64;
constexpr char kCkptMagic[8] = {'R', 'C', 'D', 'C', 'K', 'P', 'T', '1'};

VectorXd safe_std(const VectorXd& var) {
    VectorXd s = var.array().sqrt().matrix();
    for (Index i = 0; i < s.size(); ++i)
        if (!(s(i) > 1e-12)) s(i) = 1.0;
    return s;
}

MatrixXd standardize(const MatrixXd& cols, const VectorXd& mean, const VectorXd& std) {
    return ((cols.colwise() - mean).array().colwise() / std.array()).matrix();
}

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw InputError("checkpoint truncated");
    return v;
}

void put_vec(std::ofstream& out, const VectorXd& v) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

VectorXd get_vec(std::ifstream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw InputError("checkpoint corrupt");
    VectorXd v(static_cast<Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
    if (!in) throw InputError("checkpoint truncated");
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    if (steps < 0) throw InputError("train: steps must be >= 0");
    if (batch < 1) throw InputError("train: batch must be >= 1");
    if (!(lr > 0.0)) throw InputError("train: lr must be > 0");
    if (weight_decay < 0.0) throw InputError("train: weight_decay must be >= 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw InputError("train: ema_decay must lie in [0, 1)");
}

double batch_loss(const VectorXd& per_sample_sq_err) {
    double s = 0.0;
    for (Index b = 0; b < per_sample_sq_err.size(); ++b) s += per_sample_sq_err(b);
    return s / static_cast<double>(per_sample_sq_err.size());
}

double batch_loss(const VectorXd& per_sample_sq_err, const VectorXd& weights) {
    double s = 0.0;
    for (Index b = 0; b < per_sample_sq_err.size(); ++b) s += weights(b) * per_sample_sq_err(b);
    return s / static_cast<double>(per_sample_sq_err.size());
}

LossGrad loss_and_gradient(const DenoiserParams& params, const MatrixXd& x0, const std::vector<int>& steps,
                           const MatrixXd& eps, const MatrixXd& z, const VectorXd& weights,
                           const NoiseSchedule& schedule) {
    const Index B = x0.cols();
    MatrixXd xs(x0.rows(), B);
    for (Index b = 0; b < B; ++b) {
        const double ab = schedule.alpha_bar(steps[static_cast<std::size_t>(b)]);
        xs.col(b) = std::sqrt(ab) * x0.col(b) + std::sqrt(1.0 - ab) * eps.col(b);
    }
    DenoiserTape tape;
    const MatrixXd pred = moe_denoise(params, xs, steps, z, std::nullopt, &tape);
    const MatrixXd diff = eps - pred;
    LossGrad out;
    out.per_sample_sq_err = diff.colwise().squaredNorm().transpose();
    out.loss = batch_loss(out.per_sample_sq_err, weights);
    const MatrixXd d_pred = diff * (-2.0 / static_cast<double>(B) * weights).asDiagonal();
    out.grad = denoiser_backward(params, tape, d_pred);
    return out;
}

TrainResult train(const MatrixXd& targets, const MatrixXd& contexts, const NoiseSchedule& schedule,
                  const TailConfig& tail, const TrainConfig& config, const DenoiserArchitecture& arch_in,
                  const TrainState* resume, const CheckpointFn& checkpoint) {
    config.validate();
    tail.validate();
    const Index n = targets.rows();
    const Index d = targets.cols();
    if (n == 0) throw InputError("train: empty data");
    if (contexts.rows() != n) throw InputError("train: targets and contexts are not aligned");
    if (!targets.allFinite() || !contexts.allFinite()) throw InputError("train: non-finite training data");
    DenoiserArchitecture arch = arch_in;
    arch.data_dim = d;
    arch.context_dim = contexts.cols();
    arch.validate();

    TrainState st;
    if (resume) {
        st = *resume;
        if (!(st.params.arch == arch)) throw InputError("train: checkpoint architecture does not match");
    } else {
        st.params = DenoiserParams::initialize(arch, derive_seed(config.seed, 0xD1FFU));
        st.params.x_mean = targets.colwise().mean().transpose();
        st.params.x_std = safe_std(((targets.rowwise() - st.params.x_mean.transpose()).colwise().squaredNorm() /
                                    static_cast<double>(std::max<Index>(n - 1, 1)))
                                       .transpose());
        st.params.z_mean = contexts.colwise().mean().transpose();
        st.params.z_std = safe_std(((contexts.rowwise() - st.params.z_mean.transpose()).colwise().squaredNorm() /
                                    static_cast<double>(std::max<Index>(n - 1, 1)))
                                       .transpose());
        st.adam_m = VectorXd::Zero(st.params.theta.size());
        st.adam_v = VectorXd::Zero(st.params.theta.size());
        st.ema_theta = st.params.theta;
    }
    RunningQuantile threshold(tail.threshold_level(), tail.quantile_ema);
    threshold.restore(st.quantile_value, st.quantile_initialized);

    const MatrixXd x_all = standardize(targets.transpose(), st.params.x_mean, st.params.x_std);
    const MatrixXd z_all = contexts.transpose();
    const Index B = config.batch;

    TrainResult result;
    result.losses.reserve(static_cast<std::size_t>(std::max(0, config.steps - st.step)));
    while (st.step < config.steps) {
        const int k = st.step;
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(k) + 1));
        std::uniform_int_distribution<Index> pick(0, n - 1);
        std::uniform_int_distribution<int> pick_step(1, schedule.steps);
        std::normal_distribution<double> n01(0.0, 1.0);

        MatrixXd x0(d, B), z(arch.context_dim, B), raw(B, d), eps(d, B);
        std::vector<int> steps(static_cast<std::size_t>(B));
        for (Index b = 0; b < B; ++b) {
            const Index i = pick(rng);
            x0.col(b) = x_all.col(i);
            z.col(b) = z_all.col(i);
            raw.row(b) = targets.row(i);
            steps[static_cast<std::size_t>(b)] = pick_step(rng);
        }
        for (Index b = 0; b < B; ++b)
            for (Index j = 0; j < d; ++j) eps(j, b) = n01(rng);

        std::vector<double> worst(static_cast<std::size_t>(B));
        for (Index b = 0; b < B; ++b) worst[static_cast<std::size_t>(b)] = worst_asset_loss(raw.row(b).transpose());
        const bool was_initialized = threshold.initialized();
        if (!was_initialized) threshold.update(worst);
        const VectorXd weights = tail_weights(raw, tail, threshold.value());
        if (was_initialized) threshold.update(worst);

        LossGrad lg = loss_and_gradient(st.params, x0, steps, eps, z, weights, schedule);
        if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
            std::ostringstream msg;
            msg << "train: non-finite loss at step " << k << " (loss=" << lg.loss
                << ", |theta|=" << st.params.theta.norm() << ")";
            throw NumericalError(msg.str());
        }
        if (config.grad_clip > 0.0) {
            const double norm = lg.grad.norm();
            if (norm > config.grad_clip) lg.grad *= config.grad_clip / norm;
        }

        const double t = static_cast<double>(k + 1);
        st.params.theta *= 1.0 - config.lr * config.weight_decay;
        st.adam_m = config.beta1 * st.adam_m + (1.0 - config.beta1) * lg.grad;
        st.adam_v = config.beta2 * st.adam_v + (1.0 - config.beta2) * lg.grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(config.beta1, t);
        const double c2 = 1.0 - std::pow(config.beta2, t);
        st.params.theta.array() -=
            config.lr * (st.adam_m.array() / c1) / ((st.adam_v.array() / c2).sqrt() + config.adam_eps);

        const double decay =
            config.ema_warmup ? std::min(config.ema_decay, (1.0 + k) / (10.0 + k)) : config.ema_decay;
        st.ema_theta = decay * st.ema_theta + (1.0 - decay) * st.params.theta;

        st.step = k + 1;
        st.quantile_value = threshold.value();
        st.quantile_initialized = threshold.initialized();
        result.losses.push_back(lg.loss);
        if (config.log_every > 0 && st.step % config.log_every == 0)
            spdlog::info("train step {}/{} loss {:.5f} tail-threshold {:.5f}", st.step, config.steps, lg.loss,
                         threshold.value());
        if (checkpoint && config.checkpoint_every > 0 && st.step % config.checkpoint_every == 0) checkpoint(st);
    }
    result.ema_params = st.params;
    result.ema_params.theta = st.ema_theta;
    result.state = std::move(st);
    return result;
}

ScenarioSet sample(const DenoiserParams& params, const NoiseSchedule& schedule, const RegimeContext& context,
                   Index N, std::uint64_t seed) {
    const auto& a = params.arch;
    if (N < 1) throw InputError("sample: N must be >= 1");
    if (context.z.size() != a.context_dim) throw InputError("sample: context dimension mismatch");
    const Index d = a.data_dim;
    ScenarioSet out;
    out.context = context;
    out.generator = GeneratorKind::Diffusion;
    out.scenarios.resize(N, d);
    const MatrixXd z = context.z.replicate(1, kSampleChunk);

    for (Index c0 = 0; c0 < N; c0 += kSampleChunk) {
        const Index width = std::min(kSampleChunk, N - c0);
        std::vector<std::mt19937_64> engines;
        std::vector<std::normal_distribution<double>> normals(static_cast<std::size_t>(width));
        engines.reserve(static_cast<std::size_t>(width));
        for (Index i = 0; i < width; ++i) engines.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(c0 + i)));
        auto draw = [&](MatrixXd& m) {
            m.setZero();
            for (Index i = 0; i < width; ++i)
                for (Index j = 0; j < d; ++j)
                    m(j, i) = normals[static_cast<std::size_t>(i)](engines[static_cast<std::size_t>(i)]);
        };
        MatrixXd x(d, kSampleChunk), noise(d, kSampleChunk);
        draw(x);
        for (int s = schedule.steps; s >= 1; --s) {
            const std::vector<int> steps(static_cast<std::size_t>(kSampleChunk), s);
            const MatrixXd eps_hat = moe_denoise(params, x, steps, z);
            const double ab = schedule.alpha_bar(s);
            const double ab_prev = schedule.alpha_bar(s - 1);
            const double beta = 1.0 - ab / ab_prev;
            const double alpha = 1.0 - beta;
            x = (x - (beta / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(alpha);
            if (s > 1) {
                const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
                draw(noise);
                x += sigma * noise;
            }
        }
        for (Index i = 0; i < width; ++i)
            out.scenarios.row(c0 + i) = (params.x_mean.array() + params.x_std.array() * x.col(i).array()).transpose();
    }
    if (!out.scenarios.allFinite()) throw NumericalError("sample: non-finite scenarios");
    return out;
}

GateProbe gate_monotonicity_check(const DenoiserParams& params, const VectorXd& base_z, Index crisis_coordinate,
                                  int grid_points) {
    if (grid_points < 2) throw InputError("gate probe: need at least 2 grid points");
    if (crisis_coordinate < 0 || crisis_coordinate >= base_z.size()) throw InputError("gate probe: bad coordinate");
    MatrixXd z = base_z.replicate(1, grid_points);
    GateProbe probe;
    for (int i = 0; i < grid_points; ++i) {
        const double v = static_cast<double>(i) / (grid_points - 1);
        z(crisis_coordinate, i) = v;
        probe.grid.push_back(v);
    }
    const Eigen::RowVectorXd g = gate_values(params, z);
    for (int i = 0; i < grid_points; ++i) {
        probe.gate.push_back(g(i));
        if (i > 0 && g(i) < g(i - 1)) probe.monotone_non_decreasing = false;
    }
    return probe;
}

void save_train_state(const TrainState& st, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const auto& a = st.params.arch;
    for (Index v : {a.data_dim, a.context_dim, a.time_embed_dim, a.hidden_width, a.hidden_layers, a.gate_hidden})
        put<std::int64_t>(out, static_cast<std::int64_t>(v));
    put<std::int64_t>(out, st.step);
    put<double>(out, st.quantile_value);
    put<std::uint8_t>(out, st.quantile_initialized ? 1 : 0);
    for (const VectorXd* v : {&st.params.theta, &st.params.x_mean, &st.params.x_std, &st.params.z_mean,
                              &st.params.z_std, &st.adam_m, &st.adam_v, &st.ema_theta})
        put_vec(out, *v);
}

TrainState load_train_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0) throw InputError("not a checkpoint: " + path.string());
    TrainState st;
    auto& a = st.params.arch;
    a.data_dim = get<std::int64_t>(in);
    a.context_dim = get<std::int64_t>(in);
    a.time_embed_dim = get<std::int64_t>(in);
    a.hidden_width = get<std::int64_t>(in);
    a.hidden_layers = get<std::int64_t>(in);
    a.gate_hidden = get<std::int64_t>(in);
    a.validate();
    st.step = static_cast<int>(get<std::int64_t>(in));
    st.quantile_value = get<double>(in);
    st.quantile_initialized = get<std::uint8_t>(in) != 0;
    for (VectorXd* v : {&st.params.theta, &st.params.x_mean, &st.params.x_std, &st.params.z_mean, &st.params.z_std,
                        &st.adam_m, &st.adam_v, &st.ema_theta})
        *v = get_vec(in);
    if (st.params.theta.size() != a.total_size() || st.adam_m.size() != a.total_size() ||
        st.adam_v.size() != a.total_size() || st.ema_theta.size() != a.total_size())
        throw InputError("checkpoint inconsistent with its architecture");
    return st;
}

}  // namespace rcd
