#include <fstream>
#include <random>

#include "rcd/scenario_gen.hpp"

namespace rcd {

std::vector<Index> stationary_bootstrap_indices(Index T, Index length, double mean_block, std::uint64_t seed) {
    if (T < 1) throw InputError("stationary bootstrap: empty history");
    if (!(mean_block >= 1.0)) throw InputError("stationary bootstrap: mean block length must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> start(0, T - 1);
    std::bernoulli_distribution restart(1.0 / mean_block);
    std::vector<Index> idx(static_cast<std::size_t>(length));
    for (Index k = 0; k < length; ++k) {
        if (k == 0 || restart(rng))
            idx[static_cast<std::size_t>(k)] = start(rng);
        else
            idx[static_cast<std::size_t>(k)] = (idx[static_cast<std::size_t>(k - 1)] + 1) % T;
    }
    return idx;
}

ScenarioSet sbb_sample(const MatrixXd& history, double block_len, Index N, std::uint64_t seed) {
    if (history.rows() == 0) throw InputError("sbb_sample: empty history");
    if (!(block_len >= 1.0)) throw InputError("sbb_sample: block_len must be >= 1");
    if (N < 1) throw InputError("sbb_sample: N must be >= 1");
    ScenarioSet out;
    out.generator = GeneratorKind::Sbb;
    out.scenarios.resize(N, history.cols());
    for (Index i = 0; i < N; ++i) {
        const Index row = stationary_bootstrap_indices(history.rows(), 1, block_len,
                                                       derive_seed(seed, static_cast<std::uint64_t>(i)))[0];
        out.scenarios.row(i) = history.row(row);
    }
    return out;
}

ScenarioSet sbb_sample(const ReturnPanel& returns, double block_len, Index N, std::uint64_t seed) {
    return sbb_sample(returns.returns, block_len, N, seed);
}

void write_scenarios_csv(const ScenarioSet& set, const std::vector<std::string>& assets,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << "scenario_id";
    for (const auto& a : assets) out << ',' << a;
    out << '\n';
    for (Index i = 0; i < set.scenarios.rows(); ++i) {
        out << i;
        for (Index j = 0; j < set.scenarios.cols(); ++j) out << ',' << format_double(set.scenarios(i, j));
        out << '\n';
    }
}

}  // namespace rcd
