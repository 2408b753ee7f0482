#pragma once

#include <string>

#include "rcd/common.hpp"

namespace rcd {

/// Convex QP  min 1/2 x'Qx + c'x  s.t.  Ax = b,  Gx >= h.
/// Implementations supply products and a Newton-system solver; the interior-point loop
/// never forms the full KKT matrix itself.
class QpProblem {
public:
    virtual ~QpProblem() = default;

    virtual Index variables() const = 0;
    virtual Index equalities() const = 0;
    virtual Index inequalities() const = 0;

    virtual const VectorXd& c() const = 0;
    virtual const VectorXd& b() const = 0;
    virtual const VectorXd& h() const = 0;

    virtual VectorXd mul_q(const VectorXd& x) const = 0;
    virtual VectorXd mul_a(const VectorXd& x) const = 0;
    virtual VectorXd mul_at(const VectorXd& y) const = 0;
    virtual VectorXd mul_g(const VectorXd& x) const = 0;
    virtual VectorXd mul_gt(const VectorXd& z) const = 0;

    /// Prepare to solve [Q + G'diag(D)G, A'; A, 0] [dx; v] = [r1; r2].
    virtual void factor(const VectorXd& D) = 0;
    virtual void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& v) const = 0;
};

/// Dense reference implementation.
class DenseQp : public QpProblem {
public:
    MatrixXd Q, A, G;
    VectorXd c_, b_, h_;

    Index variables() const override { return Q.rows(); }
    Index equalities() const override { return A.rows(); }
    Index inequalities() const override { return G.rows(); }
    const VectorXd& c() const override { return c_; }
    const VectorXd& b() const override { return b_; }
    const VectorXd& h() const override { return h_; }
    VectorXd mul_q(const VectorXd& x) const override { return Q * x; }
    VectorXd mul_a(const VectorXd& x) const override { return A * x; }
    VectorXd mul_at(const VectorXd& y) const override { return A.transpose() * y; }
    VectorXd mul_g(const VectorXd& x) const override { return G * x; }
    VectorXd mul_gt(const VectorXd& z) const override { return G.transpose() * z; }
    void factor(const VectorXd& D) override;
    void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& v) const override;

private:
    Eigen::FullPivLU<MatrixXd> lu_;
};

enum class QpStatus { Optimal, MaxIter, Infeasible };
std::string to_string(QpStatus s);

struct IpmOptions {
    double tol = 1e-8;
    int max_iter = 200;
};

struct KktResiduals {
    double stationarity = 0.0;    // |Qx + c - A'y - G'z|_inf
    double primal = 0.0;          // max(|Ax - b|_inf, |Gx - s - h|_inf)
    double dual = 0.0;            // max(0, -min z)
    double complementarity = 0.0; // max s_i z_i

    double max() const;
};

struct QpSolution {
    VectorXd x, y, s, z;  // y: equality multipliers, z: inequality multipliers (>= 0)
    QpStatus status = QpStatus::MaxIter;
    int iterations = 0;
    KktResiduals residuals;
    double objective = 0.0;
};

/// Mehrotra predictor-corrector primal-dual interior-point method.
QpSolution solve_qp(QpProblem& problem, const IpmOptions& opts = {});

KktResiduals kkt_residuals(const QpProblem& problem, const VectorXd& x, const VectorXd& y, const VectorXd& s,
                           const VectorXd& z);

}  // namespace rcd
