#include "rcd/cvar_allocator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rcd {

namespace {

constexpr double kActiveTol = 1e-7;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

}  // namespace

void AllocationProblem::validate() const {
    const Index d = dim();
    if (d < 1) throw InputError("allocation: empty universe");
    if (sigma_hat.rows() != d || sigma_hat.cols() != d) throw InputError("allocation: sigma dimension mismatch");
    if (lower.size() != d || upper.size() != d) throw InputError("allocation: bound dimension mismatch");
    if (prev_weights.size() != d) throw InputError("allocation: prev_weights dimension mismatch");
    if (cvar_term && (scenarios.rows() < 1 || scenarios.cols() != d))
        throw InputError("allocation: scenario matrix must be N x d with N >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("allocation: alpha must lie in (0, 1)");
    if (!(lambda_mu >= 0.0) || !(gamma >= 0.0)) throw InputError("allocation: lambda_mu and gamma must be >= 0");
    if (!(kappa >= 0.0)) throw InputError("allocation: kappa must be >= 0");
    if (!(tau >= 0.0)) throw InputError("allocation: tau must be >= 0");
    if (!mu_hat.allFinite() || !sigma_hat.allFinite() || !prev_weights.allFinite())
        throw InputError("allocation: non-finite inputs");
    if (cvar_term && !scenarios.allFinite()) throw InputError("allocation: non-finite scenarios");
    if (!lower.allFinite() || !upper.allFinite()) throw InputError("allocation: box bounds must be finite");
    for (Index j = 0; j < d; ++j)
        if (lower(j) > upper(j)) throw InputError("allocation: lower bound exceeds upper bound");
    if (std::abs(prev_weights.sum() - 1.0) > 1e-8) throw InputError("allocation: prev_weights must sum to 1");
    if ((sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, sigma_hat.cwiseAbs().maxCoeff()))
        throw InputError("allocation: sigma is not symmetric");
    if (sigma_hat.llt().info() != Eigen::Success) throw InputError("allocation: sigma is not positive definite");
}

AllocationProblem make_problem(const VectorXd& mu, const MatrixXd& sigma, const MatrixXd& scenarios, double lo,
                               double hi) {
    AllocationProblem p;
    const Index d = mu.size();
    p.mu_hat = mu;
    p.sigma_hat = sigma;
    p.scenarios = scenarios;
    p.lower = VectorXd::Constant(d, lo);
    p.upper = VectorXd::Constant(d, hi);
    p.prev_weights = VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    return p;
}

CvarValue cvar_empirical(const VectorXd& losses, double alpha) {
    const Index N = losses.size();
    if (N < 1) throw InputError("cvar_empirical: empty losses");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("cvar_empirical: alpha must lie in (0, 1)");
    std::vector<double> sorted(losses.data(), losses.data() + N);
    std::sort(sorted.begin(), sorted.end());
    // The objective is convex piecewise linear in zeta; its right slope at the k-th order
    // statistic (1-based) is 1 - (N - k) / ((1 - alpha) N), first non-negative at k = ceil(alpha N).
    Index k = static_cast<Index>(std::ceil(alpha * static_cast<double>(N) - 1e-9));
    k = std::clamp<Index>(k, 1, N);
    CvarValue out;
    out.zeta = sorted[static_cast<std::size_t>(k - 1)];
    double excess = 0.0;
    for (double l : sorted)
        if (l > out.zeta) excess += l - out.zeta;
    out.cvar = out.zeta + excess / ((1.0 - alpha) * static_cast<double>(N));
    return out;
}

EpigraphQp::EpigraphQp(const AllocationProblem& problem, bool eliminate_split) : prob_(problem) {
    auto& L = lay_;
    L.d = problem.dim();
    L.cvar = problem.cvar_term;
    L.N = problem.scenario_count();
    L.split = !eliminate_split;
    L.tau_row = L.split && std::isfinite(problem.tau);
    const Index d = L.d, N = L.N;

    Index off = d;
    if (L.cvar) {
        L.zeta = off++;
        L.u = off;
        off += N;
    }
    if (L.split) {
        L.sp = off;
        L.sm = off + d;
        off += 2 * d;
    }
    L.n = off;

    L.lo = 0;
    L.hi = d;
    off = 2 * d;
    if (L.cvar) {
        L.nn = off;
        L.epi = off + N;
        off += 2 * N;
    }
    if (L.split) {
        L.sp_row = off;
        L.sm_row = off + d;
        off += 2 * d;
    }
    if (L.tau_row) L.tau = off++;
    L.m = off;
    L.p = 1 + (L.split ? d : 0);

    Qww_ = 2.0 * problem.gamma * problem.sigma_hat;
    c_ = VectorXd::Zero(L.n);
    c_.head(d) = -problem.lambda_mu * problem.mu_hat;
    if (L.cvar) {
        c_(L.zeta) = 1.0;
        c_.segment(L.u, N).setConstant(1.0 / ((1.0 - problem.alpha) * static_cast<double>(N)));
    }
    if (L.split) c_.segment(L.sp, 2 * d).setConstant(problem.kappa);

    b_ = VectorXd::Zero(L.p);
    b_(0) = 1.0;
    if (L.split) b_.tail(d) = problem.prev_weights;

    h_ = VectorXd::Zero(L.m);
    h_.segment(L.lo, d) = problem.lower;
    h_.segment(L.hi, d) = -problem.upper;
    if (L.tau_row) h_(L.tau) = -problem.tau;
    core_n_ = L.n - N;
}

Index EpigraphQp::core_index(Index var) const {
    if (!lay_.cvar || var < lay_.u) return var;
    return var - lay_.N;
}

VectorXd EpigraphQp::mul_q(const VectorXd& x) const {
    VectorXd out = VectorXd::Zero(lay_.n);
    out.head(lay_.d) = Qww_ * x.head(lay_.d);
    return out;
}

VectorXd EpigraphQp::mul_a(const VectorXd& x) const {
    const Index d = lay_.d;
    VectorXd out(lay_.p);
    out(0) = x.head(d).sum();
    if (lay_.split) out.tail(d) = x.head(d) - x.segment(lay_.sp, d) + x.segment(lay_.sm, d);
    return out;
}

VectorXd EpigraphQp::mul_at(const VectorXd& y) const {
    const Index d = lay_.d;
    VectorXd out = VectorXd::Zero(lay_.n);
    out.head(d).setConstant(y(0));
    if (lay_.split) {
        out.head(d) += y.tail(d);
        out.segment(lay_.sp, d) = -y.tail(d);
        out.segment(lay_.sm, d) = y.tail(d);
    }
    return out;
}

VectorXd EpigraphQp::mul_g(const VectorXd& x) const {
    const Index d = lay_.d, N = lay_.N;
    VectorXd out(lay_.m);
    out.segment(lay_.lo, d) = x.head(d);
    out.segment(lay_.hi, d) = -x.head(d);
    if (lay_.cvar) {
        out.segment(lay_.nn, N) = x.segment(lay_.u, N);
        out.segment(lay_.epi, N) =
            (x.segment(lay_.u, N) + prob_.scenarios * x.head(d)).array() + x(lay_.zeta);
    }
    if (lay_.split) {
        out.segment(lay_.sp_row, d) = x.segment(lay_.sp, d);
        out.segment(lay_.sm_row, d) = x.segment(lay_.sm, d);
    }
    if (lay_.tau_row) out(lay_.tau) = -x.segment(lay_.sp, 2 * d).sum();
    return out;
}

VectorXd EpigraphQp::mul_gt(const VectorXd& z) const {
    const Index d = lay_.d, N = lay_.N;
    VectorXd out = VectorXd::Zero(lay_.n);
    out.head(d) = z.segment(lay_.lo, d) - z.segment(lay_.hi, d);
    if (lay_.cvar) {
        const auto ze = z.segment(lay_.epi, N);
        out.head(d) += prob_.scenarios.transpose() * ze;
        out(lay_.zeta) = ze.sum();
        out.segment(lay_.u, N) = z.segment(lay_.nn, N) + ze;
    }
    if (lay_.split) {
        out.segment(lay_.sp, d) = z.segment(lay_.sp_row, d);
        out.segment(lay_.sm, d) = z.segment(lay_.sm_row, d);
        if (lay_.tau_row) out.segment(lay_.sp, 2 * d).array() -= z(lay_.tau);
    }
    return out;
}

void EpigraphQp::factor(const VectorXd& D) {
    const Index d = lay_.d, N = lay_.N, p = lay_.p;
    MatrixXd K = MatrixXd::Zero(core_n_ + p, core_n_ + p);
    K.topLeftCorner(d, d) = Qww_;
    K.topLeftCorner(d, d).diagonal() += D.segment(lay_.lo, d) + D.segment(lay_.hi, d);
    if (lay_.cvar) {
        const VectorXd dnn = D.segment(lay_.nn, N);
        d_epi_ = D.segment(lay_.epi, N);
        hu_ = dnn + d_epi_;
        const VectorXd cc = d_epi_.cwiseProduct(dnn).cwiseQuotient(hu_);
        const MatrixXd& R = prob_.scenarios;
        const Index iz = core_index(lay_.zeta);
        K.topLeftCorner(d, d) += R.transpose() * cc.asDiagonal() * R;
        const VectorXd rz = R.transpose() * cc;
        K.block(0, iz, d, 1) = rz;
        K.block(iz, 0, 1, d) = rz.transpose();
        K(iz, iz) = cc.sum();
    }
    if (lay_.split) {
        const Index is = core_index(lay_.sp);
        K.block(is, is, 2 * d, 2 * d).diagonal() = D.segment(lay_.sp_row, 2 * d);
        if (lay_.tau_row) K.block(is, is, 2 * d, 2 * d).array() += D(lay_.tau);
    }
    MatrixXd A = MatrixXd::Zero(p, core_n_);
    A.block(0, 0, 1, d).setOnes();
    if (lay_.split) {
        const Index is = core_index(lay_.sp);
        for (Index j = 0; j < d; ++j) {
            A(1 + j, j) = 1.0;
            A(1 + j, is + j) = -1.0;
            A(1 + j, is + d + j) = 1.0;
        }
    }
    K.topRightCorner(core_n_, p) = A.transpose();
    K.bottomLeftCorner(p, core_n_) = A;
    lu_.compute(K);
}

void EpigraphQp::solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& v) const {
    const Index d = lay_.d, N = lay_.N, p = lay_.p;
    VectorXd rhs(core_n_ + p);
    rhs.head(d) = r1.head(d);
    VectorXd g;
    if (lay_.cvar) {
        const Index iz = core_index(lay_.zeta);
        g = d_epi_.cwiseProduct(r1.segment(lay_.u, N)).cwiseQuotient(hu_);
        rhs.head(d) -= prob_.scenarios.transpose() * g;
        rhs(iz) = r1(lay_.zeta) - g.sum();
    }
    if (lay_.split) rhs.segment(core_index(lay_.sp), 2 * d) = r1.segment(lay_.sp, 2 * d);
    rhs.tail(p) = r2;
    const VectorXd sol = lu_.solve(rhs);

    dx.resize(lay_.n);
    dx.head(d) = sol.head(d);
    if (lay_.cvar) {
        const double dz = sol(core_index(lay_.zeta));
        dx(lay_.zeta) = dz;
        const VectorXd a_dx = (prob_.scenarios * sol.head(d)).array() + dz;
        dx.segment(lay_.u, N) = (r1.segment(lay_.u, N) - d_epi_.cwiseProduct(a_dx)).cwiseQuotient(hu_);
    }
    if (lay_.split) dx.segment(lay_.sp, 2 * d) = sol.segment(core_index(lay_.sp), 2 * d);
    v = sol.tail(p);
}

DenseQp EpigraphQp::to_dense() const {
    const Index n = lay_.n, m = lay_.m, p = lay_.p;
    DenseQp qp;
    qp.Q = MatrixXd::Zero(n, n);
    for (Index k = 0; k < n; ++k) qp.Q.col(k) = mul_q(VectorXd::Unit(n, k));
    qp.A.resize(p, n);
    qp.G.resize(m, n);
    for (Index k = 0; k < n; ++k) {
        qp.A.col(k) = mul_a(VectorXd::Unit(n, k));
        qp.G.col(k) = mul_g(VectorXd::Unit(n, k));
    }
    qp.c_ = c_;
    qp.b_ = b_;
    qp.h_ = h_;
    return qp;
}

namespace {

/// Empty when the constraint families admit a feasible point.
std::string infeasibility_certificate(const AllocationProblem& p) {
    const double lo_sum = p.lower.sum();
    const double hi_sum = p.upper.sum();
    if (lo_sum > 1.0 + 1e-12)
        return "budget/box: sum of lower bounds " + fmt(lo_sum) + " exceeds the budget 1";
    if (hi_sum < 1.0 - 1e-12)
        return "budget/box: sum of upper bounds " + fmt(hi_sum) + " is below the budget 1";
    if (std::isfinite(p.tau)) {
        // Distance in l1 from w_prev to the box-budget set: whatever must be bought to lift
        // weights to their floors and sold to bring them under their caps has to be matched by
        // an equal trade on the other side.
        const double raise = (p.lower - p.prev_weights).cwiseMax(0.0).sum();
        const double cut = (p.prev_weights - p.upper).cwiseMax(0.0).sum();
        const double dist = 2.0 * std::max(raise, cut);
        if (dist > p.tau + 1e-12)
            return "turnover: nearest box/budget-feasible portfolio is " + fmt(dist) +
                   " away in l1, above the cap " + fmt(p.tau);
    }
    return {};
}

}  // namespace

EpigraphQp build_epigraph_qp(const AllocationProblem& problem) {
    problem.validate();
    const std::string cert = infeasibility_certificate(problem);
    if (cert.rfind("budget/box", 0) == 0) throw InputError("infeasible allocation: " + cert);
    return EpigraphQp(problem, false);
}

AllocationResult solve(const AllocationProblem& problem, const IpmOptions& opts) {
    problem.validate();
    const Index d = problem.dim();
    AllocationResult res;
    res.certificate = infeasibility_certificate(problem);
    if (!res.certificate.empty()) {
        res.status = QpStatus::Infeasible;
        res.weights = problem.prev_weights;
        return res;
    }

    // With no cap and no penalty the split variables are free along s+ = s- + t; drop them.
    const bool eliminate = !std::isfinite(problem.tau) && problem.kappa == 0.0;
    EpigraphQp qp(problem, eliminate);
    const QpSolution sol = solve_qp(qp, opts);
    const EpigraphLayout& L = qp.layout();

    res.status = sol.status;
    res.iterations = sol.iterations;
    res.kkt = sol.residuals;
    res.weights = sol.x.head(d);
    if (L.cvar) {
        res.zeta = sol.x(L.zeta);
        res.slacks = sol.x.segment(L.u, L.N);
        res.duals.tail = sol.z.segment(L.epi, L.N);
        res.duals.slack_nonneg = sol.z.segment(L.nn, L.N);
    }
    if (L.split) {
        res.split_plus = sol.x.segment(L.sp, d);
        res.split_minus = sol.x.segment(L.sm, d);
    } else {
        const VectorXd delta = res.weights - problem.prev_weights;
        res.split_plus = delta.cwiseMax(0.0);
        res.split_minus = (-delta).cwiseMax(0.0);
    }
    res.duals.nu = sol.y(0);
    res.duals.box_lo = sol.z.segment(L.lo, d);
    res.duals.box_hi = sol.z.segment(L.hi, d);
    res.duals.turnover = L.tau_row ? sol.z(L.tau) : 0.0;
    res.objective = objective_terms(problem, res).total();
    return res;
}

ObjectiveTerms objective_terms(const AllocationProblem& p, const AllocationResult& r) {
    ObjectiveTerms t;
    t.mean = -p.lambda_mu * p.mu_hat.dot(r.weights);
    t.variance = p.gamma * r.weights.dot(p.sigma_hat * r.weights);
    if (p.cvar_term && r.slacks.size() > 0)
        t.cvar = r.zeta + r.slacks.sum() / ((1.0 - p.alpha) * static_cast<double>(r.slacks.size()));
    if (r.split_plus.size() > 0) t.penalty = p.kappa * (r.split_plus.sum() + r.split_minus.sum());
    return t;
}

double allocation_objective(const AllocationProblem& p, const VectorXd& w) {
    double f = -p.lambda_mu * p.mu_hat.dot(w) + p.gamma * w.dot(p.sigma_hat * w);
    if (p.cvar_term) f += cvar_empirical(-(p.scenarios * w), p.alpha).cvar;
    f += p.kappa * (w - p.prev_weights).cwiseAbs().sum();
    return f;
}

AuditRecord kkt_audit(const AllocationProblem& p, const AllocationResult& r, const std::string& label) {
    if (r.status != QpStatus::Optimal) throw InputError("kkt_audit: result is not optimal (" + to_string(r.status) + ")");
    const Index d = p.dim();
    AuditRecord a;
    a.label = label;
    for (Index j = 0; j < d; ++j) {
        if (r.weights(j) - p.lower(j) <= kActiveTol) a.active_lower.push_back(j);
        if (p.upper(j) - r.weights(j) <= kActiveTol) a.active_upper.push_back(j);
    }
    const double turnover = (r.weights - p.prev_weights).cwiseAbs().sum();
    a.turnover_binding = std::isfinite(p.tau) && p.tau - turnover <= kActiveTol;
    a.rho = a.turnover_binding ? r.duals.turnover : 0.0;
    a.nu = r.duals.nu;
    a.max_box_dual = std::max(r.duals.box_lo.size() ? r.duals.box_lo.maxCoeff() : 0.0,
                              r.duals.box_hi.size() ? r.duals.box_hi.maxCoeff() : 0.0);
    a.iterations = r.iterations;
    a.terms = objective_terms(p, r);
    a.kkt = r.kkt;

    if (p.cvar_term) {
        const Index N = r.duals.tail.size();
        const double tail_mass = (1.0 - p.alpha) * static_cast<double>(N);
        const double cap = 1.0 / tail_mass;
        a.tail_weights = r.duals.tail;
        a.tail_gamma = r.duals.tail * tail_mass;
        a.zeta_stationarity = 1.0 - r.duals.tail.sum();
        const VectorXd losses = -(p.scenarios * r.weights);
        const double tie_tol = 1e-5 * std::max(1.0, std::abs(r.zeta));
        bool ties_ok = true;
        for (Index i = 0; i < N; ++i) {
            const double t = r.duals.tail(i);
            if (t >= cap * (1.0 - 1e-3)) {
                ++a.tail_at_cap;
            } else if (t <= cap * 1e-3) {
                ++a.tail_zero;
            } else {
                ++a.tail_interior;
                if (std::abs(losses(i) - r.zeta) > tie_tol) ties_ok = false;
            }
        }
        // The worst scenarios fill the cap; only scenarios tied at the VaR level share the rest.
        a.capped_simplex_ok = ties_ok && static_cast<double>(a.tail_at_cap) <= tail_mass + 1e-6 &&
                              static_cast<double>(a.tail_at_cap + a.tail_interior) >= tail_mass - 1e-6;
    } else {
        a.capped_simplex_ok = true;
    }
    return a;
}

VectorXd project_partial_rebalance(const VectorXd& target, const VectorXd& prev, double tau) {
    if (target.size() != prev.size()) throw InputError("project_partial_rebalance: dimension mismatch");
    if (!(tau >= 0.0)) throw InputError("project_partial_rebalance: tau must be >= 0");
    const VectorXd delta = target - prev;
    const double dist = delta.cwiseAbs().sum();
    if (dist <= tau) return target;
    return prev + (tau / dist) * delta;
}

nlohmann::json to_json(const AllocationProblem& p) {
    nlohmann::json j;
    j["d"] = p.dim();
    j["N"] = p.scenario_count();
    j["alpha"] = p.alpha;
    j["lambda_mu"] = p.lambda_mu;
    j["gamma"] = p.gamma;
    j["tau"] = std::isfinite(p.tau) ? nlohmann::json(p.tau) : nlohmann::json("inf");
    j["kappa"] = p.kappa;
    j["cvar_term"] = p.cvar_term;
    j["mu_hat"] = to_std_vector(p.mu_hat);
    j["lower"] = to_std_vector(p.lower);
    j["upper"] = to_std_vector(p.upper);
    j["prev_weights"] = to_std_vector(p.prev_weights);
    return j;
}

nlohmann::json to_json(const AllocationResult& r) {
    nlohmann::json j;
    j["status"] = to_string(r.status);
    j["weights"] = to_std_vector(r.weights);
    j["zeta"] = r.zeta;
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["kkt_residuals"] = {{"stationarity", r.kkt.stationarity},
                          {"primal", r.kkt.primal},
                          {"dual", r.kkt.dual},
                          {"complementarity", r.kkt.complementarity}};
    j["duals"] = {{"nu", r.duals.nu},
                  {"box_lo", to_std_vector(r.duals.box_lo)},
                  {"box_hi", to_std_vector(r.duals.box_hi)},
                  {"turnover", r.duals.turnover}};
    if (!r.certificate.empty()) j["certificate"] = r.certificate;
    return j;
}

nlohmann::json to_json(const AuditRecord& a) {
    nlohmann::json j;
    j["label"] = a.label;
    j["active_lower"] = a.active_lower;
    j["active_upper"] = a.active_upper;
    j["turnover_binding"] = a.turnover_binding;
    j["tail_weights"] = to_std_vector(a.tail_weights);
    j["zeta_stationarity"] = a.zeta_stationarity;
    j["duals"] = {{"nu", a.nu}, {"rho", a.rho}, {"max_box", a.max_box_dual}};
    j["iterations"] = a.iterations;
    j["objective"] = {{"mean", a.terms.mean},
                      {"variance", a.terms.variance},
                      {"cvar", a.terms.cvar},
                      {"penalty", a.terms.penalty},
                      {"total", a.terms.total()}};
    j["kkt_residuals"] = {{"stationarity", a.kkt.stationarity},
                          {"primal", a.kkt.primal},
                          {"dual", a.kkt.dual},
                          {"complementarity", a.kkt.complementarity}};
    j["tail_structure"] = {{"at_cap", a.tail_at_cap},
                           {"interior", a.tail_interior},
                           {"zero", a.tail_zero},
                           {"capped_simplex_ok", a.capped_simplex_ok}};
    return j;
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << record.dump() << '\n';
}

}  // namespace rcd
