#include "rcd/qp_solver.hpp"

#include <algorithm>
#include <cmath>

namespace rcd {

void DenseQp::factor(const VectorXd& D) {
    const Index n = variables();
    const Index p = equalities();
    MatrixXd K = MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = Q + G.transpose() * D.asDiagonal() * G;
    K.topRightCorner(n, p) = A.transpose();
    K.bottomLeftCorner(p, n) = A;
    lu_.compute(K);
}

void DenseQp::solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& v) const {
    VectorXd rhs(r1.size() + r2.size());
    rhs << r1, r2;
    const VectorXd sol = lu_.solve(rhs);
    dx = sol.head(r1.size());
    v = sol.tail(r2.size());
}

std::string to_string(QpStatus s) {
    switch (s) {
        case QpStatus::Optimal: return "optimal";
        case QpStatus::MaxIter: return "max_iter";
        case QpStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_step(const VectorXd& v, const VectorXd& dv) {
    double a = 1.0;
    for (Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    return a;
}

}  // namespace

KktResiduals kkt_residuals(const QpProblem& qp, const VectorXd& x, const VectorXd& y, const VectorXd& s,
                           const VectorXd& z) {
    KktResiduals r;
    r.stationarity = inf_norm(qp.mul_q(x) + qp.c() - qp.mul_at(y) - qp.mul_gt(z));
    r.primal = std::max(inf_norm(qp.mul_a(x) - qp.b()), inf_norm(qp.mul_g(x) - s - qp.h()));
    r.dual = z.size() == 0 ? 0.0 : std::max(0.0, -z.minCoeff());
    r.complementarity = s.size() == 0 ? 0.0 : s.cwiseProduct(z).cwiseAbs().maxCoeff();
    return r;
}

QpSolution solve_qp(QpProblem& qp, const IpmOptions& opts) {
    const Index m = qp.inequalities();
    QpSolution out;

    // Start: minimize 1/2 x'Qx + c'x + 1/2 |Gx - h|^2 subject to Ax = b, then push the
    // slacks into the positive orthant.
    qp.factor(VectorXd::Ones(m));
    VectorXd v;
    qp.solve(-qp.c() + qp.mul_gt(qp.h()), qp.b(), out.x, v);
    out.y = -v;
    out.s = qp.mul_g(out.x) - qp.h();
    for (Index i = 0; i < m; ++i) out.s(i) = std::max(out.s(i), 1.0);
    out.z = VectorXd::Ones(m);

    VectorXd dx, dy, ds, dz, dx_a, ds_a, dz_a;
    for (int it = 0;; ++it) {
        const VectorXd rd = qp.mul_q(out.x) + qp.c() - qp.mul_at(out.y) - qp.mul_gt(out.z);
        const VectorXd rp = qp.mul_a(out.x) - qp.b();
        const VectorXd rg = qp.mul_g(out.x) - out.s - qp.h();
        out.residuals = kkt_residuals(qp, out.x, out.y, out.s, out.z);
        out.iterations = it;
        if (!std::isfinite(out.residuals.max())) break;
        if (out.residuals.max() <= opts.tol) {
            out.status = QpStatus::Optimal;
            break;
        }
        if (it >= opts.max_iter) break;

        const double mu = m > 0 ? out.s.dot(out.z) / static_cast<double>(m) : 0.0;
        const VectorXd D = out.z.cwiseQuotient(out.s);
        qp.factor(D);

        auto newton = [&](const VectorXd& rc, VectorXd& px, VectorXd& ps, VectorXd& pz, VectorXd* py) {
            const VectorXd w = (rc + out.z.cwiseProduct(rg)).cwiseQuotient(out.s);
            VectorXd pv;
            qp.solve(-rd - qp.mul_gt(w), -rp, px, pv);
            if (py) *py = -pv;
            ps = qp.mul_g(px) + rg;
            pz = -(rc + out.z.cwiseProduct(ps)).cwiseQuotient(out.s);
        };

        VectorXd rc = out.s.cwiseProduct(out.z);
        newton(rc, dx_a, ds_a, dz_a, nullptr);
        const double a_aff = std::min(max_step(out.s, ds_a), max_step(out.z, dz_a));
        const double mu_aff =
            m > 0 ? (out.s + a_aff * ds_a).dot(out.z + a_aff * dz_a) / static_cast<double>(m) : 0.0;
        const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

        rc += ds_a.cwiseProduct(dz_a);
        rc.array() -= sigma * mu;
        newton(rc, dx, ds, dz, &dy);
        const double a = std::min(1.0, 0.99 * std::min(max_step(out.s, ds), max_step(out.z, dz)));
        out.x += a * dx;
        out.y += a * dy;
        out.s += a * ds;
        out.z += a * dz;
    }
    out.objective = 0.5 * out.x.dot(qp.mul_q(out.x)) + qp.c().dot(out.x);
    return out;
}

}  // namespace rcd
