#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "prc/linalg.hpp"
#include "prc/rng.hpp"

namespace prc {

// Regularized lower incomplete gamma P(a, x). Throws DomainError for a <= 0
// or x < 0.
double gamma_p(double a, double x);

// Inverse chi-squared CDF: returns x with P(dof/2, x/2) = p for p in [0, 1).
double chi2_quantile(int dof, double p);

// Confidence and risk parameters of a certification run:
// c credibility level, (eps, beta) scenario risk/confidence,
// (eps_val, alpha) validation risk/confidence.
struct RiskProfile {
    double c;
    double eps;
    double beta;
    double eps_val;
    double alpha;

    // All entries in (0,1) and eps + eps_val < c, else the certificate is vacuous.
    void validate() const;
};

// Scenario count M = ceil((2/eps) * ln(1/beta) + n_k).
long scenario_sample_bound(double eps, double beta, int n_k);

// Validation count M_val = ceil(ln(1/alpha) / (2 * eps_val^2)), at least 1.
long hoeffding_sample_bound(double eps_val, double alpha);

// Number of scalar decision variables of the scenario program.
int n_k_for(int d_x, int d_u);

// Gaussian law over the stacked parameter matrix S = [A B] (d_x rows,
// d_x + d_u columns). The covariance lives over vec(S) with COLUMN-MAJOR
// vectorization. When the law factorizes as a matrix normal with row
// covariance U (d_x x d_x) and column covariance V (d_q x d_q), the optional
// Kronecker factors satisfy covariance = kron(V, U).
class GaussianParameterLaw {
public:
    GaussianParameterLaw(int d_x, int d_u, MatrixXd mean, MatrixXd covariance,
                         std::optional<MatrixXd> kron_row_cov = std::nullopt,
                         std::optional<MatrixXd> kron_col_cov = std::nullopt);

    int d_x() const { return d_x_; }
    int d_u() const { return d_u_; }
    int d_q() const { return d_x_ + d_u_; }
    int d_s() const { return d_x_ * (d_x_ + d_u_); }

    const MatrixXd& mean() const { return mean_; }
    const MatrixXd& covariance() const { return covariance_; }
    bool has_kron_factors() const { return kron_row_.has_value(); }
    const MatrixXd& kron_row_cov() const { return *kron_row_; }
    const MatrixXd& kron_col_cov() const { return *kron_col_; }

    // vec(sample) ~ N(vec(mean), covariance) through the cached symmetric
    // square root; a pure function of the rng state.
    MatrixXd sample(RngEngine& rng) const;

    // (vec(s) - vec(mean))' pinv(covariance) (vec(s) - vec(mean)).
    // Pseudo-inverse cutoff: 1e-12 relative to the largest eigenvalue.
    double mahalanobis_sq(const MatrixXd& s) const;

    // Content hash over dimensions, mean, and covariance bytes; used for
    // provenance stamps on scenario sets.
    std::uint64_t content_hash() const;

private:
    int d_x_;
    int d_u_;
    MatrixXd mean_;
    MatrixXd covariance_;
    std::optional<MatrixXd> kron_row_;
    std::optional<MatrixXd> kron_col_;
    MatrixXd factor_;  // symmetric PSD sqrt of covariance
    MatrixXd pinv_;
};

// Base law restricted to the credible ellipsoid of mass c.
class TruncatedLaw {
public:
    TruncatedLaw(GaussianParameterLaw base, double credibility);

    const GaussianParameterLaw& base() const { return base_; }
    double credibility() const { return credibility_; }
    double radius_sq() const { return radius_sq_; }

    bool contains(const MatrixXd& s) const { return base_.mahalanobis_sq(s) <= radius_sq_; }

private:
    GaussianParameterLaw base_;
    double credibility_;
    double radius_sq_;
};

struct RejectionCounter {
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    double acceptance_rate() const {
        return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
    }
};

// Rejection sampler from the base law; expected acceptance rate equals the
// credibility level.
MatrixXd sample_truncated(const TruncatedLaw& tlaw, RngEngine& rng,
                          RejectionCounter* counter = nullptr);

// Bartlett construction; dof >= d and PSD scale required.
MatrixXd sample_wishart(const MatrixXd& scale, int dof, RngEngine& rng);

}  // namespace prc
