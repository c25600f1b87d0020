#include "prc/linear_control.hpp"

#include <cmath>
#include <limits>

#include "prc/errors.hpp"

namespace prc {

void LinearSystem::validate() const {
    if (a.rows() == 0 || a.rows() != a.cols()) throw DomainError("LinearSystem: a must be square");
    if (b.rows() != a.rows() || b.cols() == 0)
        throw DomainError("LinearSystem: b must have d_x rows and at least one column");
    if (!a.allFinite() || !b.allFinite()) throw DomainError("LinearSystem: entries must be finite");
}

void CostWeights::validate(int d_x, int d_u) const {
    if (q.rows() != d_x || q.cols() != d_x) throw DomainError("CostWeights: q must be d_x x d_x");
    if (r.rows() != d_u || r.cols() != d_u) throw DomainError("CostWeights: r must be d_u x d_u");
    if (sigma_w.rows() != d_x || sigma_w.cols() != d_x)
        throw DomainError("CostWeights: sigma_w must be d_x x d_x");
    require_symmetric(q, "CostWeights q");
    require_symmetric(r, "CostWeights r");
    if (min_eigenvalue(q) < -1e-10 * std::max(1.0, q.trace()))
        throw DomainError("CostWeights: q must be PSD");
    if (min_eigenvalue(r) <= 1e-12) throw DomainError("CostWeights: r must be PD");
    const double scale = std::max(1.0, sigma_w.cwiseAbs().maxCoeff());
    if ((sigma_w - MatrixXd(sigma_w.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DomainError("CostWeights: sigma_w must be diagonal");
    if (sigma_w.diagonal().minCoeff() < 0.0)
        throw DomainError("CostWeights: sigma_w must be nonnegative");
}

void Gain::validate() const {
    if (!k.allFinite()) throw DomainError("Gain: entries must be finite");
}

double spectral_radius(const MatrixXd& m) {
    if (!is_square(m)) throw DomainError("spectral_radius: matrix must be square");
    if (!m.allFinite()) throw DomainError("spectral_radius: entries must be finite");
    Eigen::EigenSolver<MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stable(const LinearSystem& sys, const Gain& k) {
    return spectral_radius(sys.a + sys.b * k.k) < 1.0;
}

DareSolution dare_solve(const LinearSystem& sys, const CostWeights& weights) {
    sys.validate();
    weights.validate(sys.d_x(), sys.d_u());
    const MatrixXd& a = sys.a;
    const MatrixXd& b = sys.b;
    const MatrixXd& q = weights.q;
    const MatrixXd& r = weights.r;

    MatrixXd p = q;
    constexpr int kMaxIter = 10000;
    for (int it = 0; it < kMaxIter; ++it) {
        const MatrixXd btpb = r + b.transpose() * p * b;
        const MatrixXd btpa = b.transpose() * p * a;
        const MatrixXd next = symmetrized(q + a.transpose() * p * a -
                                          btpa.transpose() * btpb.ldlt().solve(btpa));
        const double residual = (next - p).norm();
        p = next;
        if (residual <= 1e-10 * std::max(1.0, p.norm())) {
            const MatrixXd gain_denom = r + b.transpose() * p * b;
            Gain k{-gain_denom.ldlt().solve(b.transpose() * p * a)};
            if (!is_stable(sys, k))
                throw NumericalError("dare_solve: converged point is not stabilizing");
            return DareSolution{p, std::move(k)};
        }
    }
    throw NumericalError("dare_solve: no convergence in 10000 iterations; (A,B) likely not stabilizable");
}

MatrixXd dlyap_solve(const MatrixXd& a_cl, const MatrixXd& w) {
    if (!is_square(a_cl) || a_cl.rows() != w.rows() || !is_square(w))
        throw DomainError("dlyap_solve: dimension mismatch");
    require_symmetric(w, "dlyap_solve w", 1e-8);
    if (spectral_radius(a_cl) >= 1.0) throw DomainError("dlyap_solve: a_cl must be Schur stable");

    MatrixXd p = symmetrized(w);
    MatrixXd m = a_cl;
    // ||M|| decays like rho^(2^k); ~60 doublings suffice for any stable input.
    for (int it = 0; it < 200; ++it) {
        if (m.norm() < 1e-15) break;
        p = symmetrized(p + m.transpose() * p * m);
        m = m * m;
    }
    return p;
}

double lyapunov_cost(const LinearSystem& sys, const Gain& k, const CostWeights& weights) {
    if (!is_stable(sys, k)) return std::numeric_limits<double>::infinity();
    const MatrixXd a_cl = sys.a + sys.b * k.k;
    const MatrixXd stage = symmetrized(weights.q + k.k.transpose() * weights.r * k.k);
    const MatrixXd p_cl = dlyap_solve(a_cl, stage);
    return (p_cl * weights.sigma_w).trace();
}

double finite_horizon_expected_cost(const LinearSystem& sys, const Gain& k,
                                    const CostWeights& weights, const VectorXd& x0, long t) {
    if (t < 1) throw DomainError("finite_horizon_expected_cost: t must be >= 1");
    if (x0.size() != sys.d_x()) throw DomainError("finite_horizon_expected_cost: x0 dimension");
    const MatrixXd a_cl = sys.a + sys.b * k.k;
    const MatrixXd stage = symmetrized(weights.q + k.k.transpose() * weights.r * k.k);

    MatrixXd cov = x0 * x0.transpose();
    double total = 0.0;
    for (long step = 0; step < t; ++step) {
        const double c = (stage * cov).trace();
        if (!std::isfinite(c) || c >= kCostCeiling * static_cast<double>(t)) {
            return kCostCeiling;
        }
        total += c;
        if (step + 1 < t) cov = symmetrized(a_cl * cov * a_cl.transpose() + weights.sigma_w);
        if (!cov.allFinite()) return kCostCeiling;
    }
    const double avg = total / static_cast<double>(t);
    return std::min(avg, kCostCeiling);
}

}  // namespace prc
