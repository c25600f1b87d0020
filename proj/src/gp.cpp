#include "prc/gp.hpp"

#include <cmath>

#include "prc/errors.hpp"

namespace prc {

void SeKernel::validate() const {
    if (!(signal_variance > 0.0)) throw DomainError("SeKernel: signal variance must be positive");
    if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
        throw DomainError("SeKernel: lengthscales must be strictly positive");
}

double SeKernel::operator()(const VectorXd& a, const VectorXd& b) const {
    const VectorXd scaled = (a - b).cwiseQuotient(lengthscales);
    return signal_variance * std::exp(-0.5 * scaled.squaredNorm());
}

void TransitionDataset::validate() const {
    if (inputs.rows() != targets.rows())
        throw DomainError("TransitionDataset: inputs and targets row counts differ");
    if (!inputs.allFinite() || !targets.allFinite())
        throw DomainError("TransitionDataset: entries must be finite");
}

GpPosterior GpPosterior::fit(TransitionDataset dataset, SeKernel kernel, VectorXd noise_variances) {
    kernel.validate();
    dataset.validate();
    if ((noise_variances.array() <= 0.0).any())
        throw DomainError("GpPosterior: noise variances must be positive");
    const long n = dataset.size();
    if (n > 0) {
        if (dataset.input_dim() != kernel.lengthscales.size())
            throw DomainError("GpPosterior: dataset input dimension does not match kernel");
        if (dataset.output_dim() != noise_variances.size())
            throw DomainError("GpPosterior: dataset output dimension does not match noise vector");
    }

    GpPosterior post;
    post.kernel_ = std::move(kernel);
    post.dataset_ = std::move(dataset);
    post.noise_variances_ = std::move(noise_variances);

    const int d_out = post.output_dim();
    post.weights_.resize(n, d_out);
    if (n == 0) return post;

    MatrixXd gram(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j <= i; ++j) {
            const double v = post.kernel_(post.dataset_.inputs.row(i).transpose(),
                                          post.dataset_.inputs.row(j).transpose());
            gram(i, j) = v;
            gram(j, i) = v;
        }

    post.factors_.reserve(d_out);
    for (int out = 0; out < d_out; ++out) {
        MatrixXd sys = gram;
        sys.diagonal().array() += post.noise_variances_[out];
        Eigen::LLT<MatrixXd> llt(sys);
        if (llt.info() != Eigen::Success) {
            // One jitter retry before giving up.
            sys.diagonal().array() += 1e-8 * post.kernel_.signal_variance;
            llt.compute(sys);
            if (llt.info() != Eigen::Success)
                throw NumericalError("GpPosterior: Gram factorization failed after jitter retry");
        }
        post.factors_.push_back(std::move(llt));
        post.weights_.col(out) = post.factors_.back().solve(post.dataset_.targets.col(out));
    }
    return post;
}

GpPosterior::Prediction GpPosterior::predict(const VectorXd& q) const {
    if (q.size() != input_dim()) throw DomainError("predict: query dimension mismatch");
    const long n = dataset_.size();
    const int d_out = output_dim();
    Prediction out;
    out.mean = VectorXd::Zero(d_out);
    out.variance = VectorXd::Constant(d_out, kernel_.signal_variance);
    if (n == 0) return out;

    VectorXd kstar(n);
    for (long i = 0; i < n; ++i) kstar[i] = kernel_(q, dataset_.inputs.row(i).transpose());
    for (int i = 0; i < d_out; ++i) {
        out.mean[i] = kstar.dot(weights_.col(i));
        const double reduction = kstar.dot(factors_[i].solve(kstar));
        double v = kernel_.signal_variance - reduction;
        if (v < 0.0) {
            if (v < -1e-12 * kernel_.signal_variance)
                throw NumericalError("predict: variance went negative beyond tolerance");
            v = 0.0;
        }
        out.variance[i] = v;
    }
    return out;
}

GaussianParameterLaw GpPosterior::linearize(const VectorXd& q_star) const {
    if (q_star.size() != input_dim()) throw DomainError("linearize: query dimension mismatch");
    const long n = dataset_.size();
    const int d_q = input_dim();
    const int d_x = output_dim();
    const int d_u = d_q - d_x;
    if (d_u < 1) throw DomainError("linearize: input dimension must exceed output dimension");

    const VectorXd inv_sq_ls = kernel_.lengthscales.array().square().inverse();
    const MatrixXd prior_cov = kernel_.signal_variance * MatrixXd(inv_sq_ls.asDiagonal());

    MatrixXd mean = MatrixXd::Zero(d_x, d_q);
    std::vector<MatrixXd> row_covs(d_x, prior_cov);

    if (n > 0) {
        // dk/dq_a (q*, x_n) = k(q*, x_n) (x_na - q*_a) / l_a^2
        MatrixXd deriv(d_q, n);
        for (long i = 0; i < n; ++i) {
            const VectorXd xi = dataset_.inputs.row(i).transpose();
            deriv.col(i) = kernel_(q_star, xi) * (xi - q_star).cwiseProduct(inv_sq_ls);
        }
        for (int i = 0; i < d_x; ++i) {
            mean.row(i) = (deriv * weights_.col(i)).transpose();
            const MatrixXd reduction = deriv * factors_[i].solve(deriv.transpose());
            row_covs[i] = symmetrized(prior_cov - reduction);
        }
    }

    MatrixXd cov = MatrixXd::Zero(d_x * d_q, d_x * d_q);
    for (int i = 0; i < d_x; ++i)
        for (int j = 0; j < d_q; ++j)
            for (int jp = 0; jp < d_q; ++jp)
                cov(i + j * d_x, i + jp * d_x) = row_covs[i](j, jp);

    // Kronecker factors exist when the row blocks are pairwise proportional.
    std::optional<MatrixXd> kron_row, kron_col;
    const double base_norm = row_covs[0].norm();
    if (base_norm > 0.0) {
        VectorXd gamma(d_x);
        gamma[0] = 1.0;
        bool proportional = true;
        for (int i = 1; i < d_x && proportional; ++i) {
            const double g = (row_covs[0].cwiseProduct(row_covs[i])).sum() / (base_norm * base_norm);
            gamma[i] = g;
            proportional = (row_covs[i] - g * row_covs[0]).norm() <= 1e-10 * std::max(1.0, row_covs[i].norm());
        }
        if (proportional) {
            kron_row = MatrixXd(gamma.asDiagonal());
            kron_col = row_covs[0];
        }
    }

    return GaussianParameterLaw(d_x, d_u, std::move(mean), std::move(cov),
                                std::move(kron_row), std::move(kron_col));
}

MatrixXd GpPosterior::process_noise_estimate() const {
    return MatrixXd(noise_variances_.asDiagonal());
}

GaussianParameterLaw delta_adjusted(const GaussianParameterLaw& law) {
    MatrixXd mean = law.mean();
    mean.leftCols(law.d_x()) += MatrixXd::Identity(law.d_x(), law.d_x());
    if (law.has_kron_factors())
        return GaussianParameterLaw(law.d_x(), law.d_u(), std::move(mean), law.covariance(),
                                    law.kron_row_cov(), law.kron_col_cov());
    return GaussianParameterLaw(law.d_x(), law.d_u(), std::move(mean), law.covariance());
}

}  // namespace prc
