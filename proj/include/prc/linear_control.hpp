#pragma once

#include <Eigen/Dense>

#include "prc/linalg.hpp"

namespace prc {

struct LinearSystem {
    MatrixXd a;  // d_x x d_x
    MatrixXd b;  // d_x x d_u

    int d_x() const { return static_cast<int>(a.rows()); }
    int d_u() const { return static_cast<int>(b.cols()); }
    void validate() const;
};

struct CostWeights {
    MatrixXd q;        // symmetric PSD
    MatrixXd r;        // symmetric PD
    MatrixXd sigma_w;  // diagonal nonnegative process noise covariance

    void validate(int d_x, int d_u) const;
};

struct Gain {
    MatrixXd k;  // d_u x d_x

    void validate() const;
};

// Largest eigenvalue modulus via a general (non-symmetric) eigensolver.
double spectral_radius(const MatrixXd& m);

// Strict stability of the closed loop a + b k; a spectral radius of exactly
// 1.0 counts as unstable.
bool is_stable(const LinearSystem& sys, const Gain& k);

struct DareSolution {
    MatrixXd p;
    Gain k_ce;
};

// Fixed-point iteration on the Riccati recursion, started at Q, run until the
// self-consistency residual drops below 1e-10 relative. Non-convergence in
// 10,000 sweeps reports a stabilizability failure.
DareSolution dare_solve(const LinearSystem& sys, const CostWeights& weights);

// Stein equation P = w + a_cl' P a_cl by squaring: P <- P + M' P M, M <- M^2,
// until ||M|| < 1e-15. Requires rho(a_cl) < 1.
MatrixXd dlyap_solve(const MatrixXd& a_cl, const MatrixXd& w);

// Exact stationary per-step expected cost trace(P_cl sigma_w) with
// P_cl = dlyap(A + BK, Q + K'RK). Returns +infinity when the closed loop is
// unstable so batch evaluation can proceed.
double lyapunov_cost(const LinearSystem& sys, const Gain& k, const CostWeights& weights);

// Time-averaged cost over t steps from the exact covariance recursion
// Sigma_0 = x0 x0', Sigma_{k+1} = A_cl Sigma_k A_cl' + sigma_w. Finite for
// unstable systems; values saturate at 1e300.
double finite_horizon_expected_cost(const LinearSystem& sys, const Gain& k,
                                    const CostWeights& weights, const VectorXd& x0, long t);

// Saturation ceiling for finite-horizon costs of unstable systems.
inline constexpr double kCostCeiling = 1e300;

}  // namespace prc
