#include "prc/distributions.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "prc/errors.hpp"

namespace prc {

double gamma_p(double a, double x) {
    if (a <= 0.0) throw DomainError("gamma_p: shape must be positive");
    if (x < 0.0) throw DomainError("gamma_p: argument must be nonnegative");
    return boost::math::gamma_p(a, x);
}

double chi2_quantile(int dof, double p) {
    if (dof < 1) throw DomainError("chi2_quantile: dof must be >= 1");
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in [0,1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

void RiskProfile::validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_unit(c) || !in_unit(eps) || !in_unit(beta) || !in_unit(eps_val) || !in_unit(alpha))
        throw DomainError("RiskProfile: all parameters must lie in (0,1)");
    if (!(eps + eps_val < c))
        throw DomainError("RiskProfile: eps + eps_val must be < c, certificate would be vacuous");
}

long scenario_sample_bound(double eps, double beta, int n_k) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("scenario_sample_bound: eps must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("scenario_sample_bound: beta must lie in (0,1)");
    if (n_k < 1) throw DomainError("scenario_sample_bound: n_k must be >= 1");
    const double raw = (2.0 / eps) * std::log(1.0 / beta) + static_cast<double>(n_k);
    return std::max(1L, static_cast<long>(std::ceil(raw)));
}

long hoeffding_sample_bound(double eps_val, double alpha) {
    if (!(eps_val > 0.0 && eps_val < 1.0))
        throw DomainError("hoeffding_sample_bound: eps_val must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("hoeffding_sample_bound: alpha must lie in (0,1)");
    const double raw = std::log(1.0 / alpha) / (2.0 * eps_val * eps_val);
    return std::max(1L, static_cast<long>(std::ceil(raw)));
}

int n_k_for(int d_x, int d_u) {
    if (d_x < 1 || d_u < 1) throw DomainError("n_k_for: dimensions must be >= 1");
    return 2 * d_x * d_x + d_x * d_u;
}

GaussianParameterLaw::GaussianParameterLaw(int d_x, int d_u, MatrixXd mean, MatrixXd covariance,
                                           std::optional<MatrixXd> kron_row_cov,
                                           std::optional<MatrixXd> kron_col_cov)
    : d_x_(d_x), d_u_(d_u), mean_(std::move(mean)), covariance_(std::move(covariance)),
      kron_row_(std::move(kron_row_cov)), kron_col_(std::move(kron_col_cov)) {
    if (d_x_ < 1 || d_u_ < 1) throw DomainError("GaussianParameterLaw: dimensions must be >= 1");
    if (mean_.rows() != d_x_ || mean_.cols() != d_x_ + d_u_)
        throw DomainError("GaussianParameterLaw: mean must be d_x x (d_x + d_u)");
    const int ds = d_s();
    if (covariance_.rows() != ds || covariance_.cols() != ds)
        throw DomainError("GaussianParameterLaw: covariance must be d_s x d_s");
    require_symmetric(covariance_, "GaussianParameterLaw covariance");
    covariance_ = symmetrized(covariance_);

    const double trace = covariance_.trace();
    const double floor = -1e-10 * std::max(1e-300, trace);
    if (min_eigenvalue(covariance_) < floor)
        throw DomainError("GaussianParameterLaw: covariance indefinite beyond tolerance");

    if (kron_row_.has_value() != kron_col_.has_value())
        throw DomainError("GaussianParameterLaw: Kronecker factors must come as a pair");
    if (kron_row_) {
        if (kron_row_->rows() != d_x_ || kron_row_->cols() != d_x_ ||
            kron_col_->rows() != d_q() || kron_col_->cols() != d_q())
            throw DomainError("GaussianParameterLaw: Kronecker factor dimensions");
        // covariance = kron(col_cov, row_cov) under column-major vec.
        MatrixXd prod(ds, ds);
        for (int j = 0; j < d_q(); ++j)
            for (int jp = 0; jp < d_q(); ++jp)
                prod.block(j * d_x_, jp * d_x_, d_x_, d_x_) = (*kron_col_)(j, jp) * (*kron_row_);
        const double denom = std::max(1e-300, covariance_.norm());
        if ((prod - covariance_).norm() > 1e-8 * denom)
            throw DomainError("GaussianParameterLaw: Kronecker factors do not reproduce covariance");
    }

    factor_ = symmetric_sqrt_psd(covariance_);
    pinv_ = symmetric_pseudo_inverse(covariance_);
}

MatrixXd GaussianParameterLaw::sample(RngEngine& rng) const {
    const VectorXd z = standard_normal_vector(d_s(), rng);
    const VectorXd v = vec(mean_) + factor_ * z;
    return unvec(v, d_x_, d_q());
}

double GaussianParameterLaw::mahalanobis_sq(const MatrixXd& s) const {
    if (s.rows() != d_x_ || s.cols() != d_q())
        throw DomainError("mahalanobis_sq: sample dimension mismatch");
    const VectorXd z = vec(s) - vec(mean_);
    const double m = z.dot(pinv_ * z);
    return std::max(0.0, m);
}

std::uint64_t GaussianParameterLaw::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto absorb = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    absorb(static_cast<std::uint64_t>(d_x_));
    absorb(static_cast<std::uint64_t>(d_u_));
    auto absorb_matrix = [&](const MatrixXd& m) {
        const double* p = m.data();
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(double));
            std::memcpy(&bits, &p[i], sizeof(bits));
            absorb(bits);
        }
    };
    absorb_matrix(mean_);
    absorb_matrix(covariance_);
    return h;
}

TruncatedLaw::TruncatedLaw(GaussianParameterLaw base, double credibility)
    : base_(std::move(base)), credibility_(credibility),
      radius_sq_(0.0) {
    if (!(credibility_ > 0.0 && credibility_ < 1.0))
        throw DomainError("TruncatedLaw: credibility must lie in (0,1)");
    radius_sq_ = chi2_quantile(base_.d_s(), credibility_);
}

MatrixXd sample_truncated(const TruncatedLaw& tlaw, RngEngine& rng, RejectionCounter* counter) {
    // Expected iterations 1/c; the cap only guards against degenerate misuse.
    constexpr std::uint64_t kMaxProposals = 1u << 24;
    for (std::uint64_t i = 0; i < kMaxProposals; ++i) {
        const MatrixXd candidate = tlaw.base().sample(rng);
        if (counter) ++counter->proposals;
        if (tlaw.base().mahalanobis_sq(candidate) <= tlaw.radius_sq()) {
            if (counter) ++counter->accepted;
            return candidate;
        }
    }
    throw NumericalError("sample_truncated: rejection sampler exceeded proposal cap");
}

MatrixXd sample_wishart(const MatrixXd& scale, int dof, RngEngine& rng) {
    if (!is_square(scale)) throw DomainError("sample_wishart: scale must be square");
    require_symmetric(scale, "sample_wishart scale", 1e-8);
    const int d = static_cast<int>(scale.rows());
    if (dof < d) throw DomainError("sample_wishart: dof must be >= dimension");
    const double floor = -1e-10 * std::max(1e-300, scale.trace());
    if (min_eigenvalue(scale) < floor) throw DomainError("sample_wishart: scale must be PSD");

    const MatrixXd f = symmetric_sqrt_psd(scale);

    // Bartlett factor: lower triangular, chi distributed diagonal,
    // standard normal strict lower triangle.
    MatrixXd a = MatrixXd::Zero(d, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < d; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(dof - i));
        a(i, i) = std::sqrt(chi2(rng));
        for (int j = 0; j < i; ++j) a(i, j) = normal(rng);
    }
    const MatrixXd fa = f * a;
    return symmetrized(fa * fa.transpose());
}

}  // namespace prc
