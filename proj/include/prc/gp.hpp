#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "prc/distributions.hpp"
#include "prc/linalg.hpp"

namespace prc {

// Squared-exponential kernel with per-dimension lengthscales.
struct SeKernel {
    double signal_variance;   // variance at zero distance
    VectorXd lengthscales;    // length d_x + d_u, strictly positive

    void validate() const;
    double operator()(const VectorXd& a, const VectorXd& b) const;
};

// One-step transition data: rows pair a state-action tuple with the observed
// successor state.
struct TransitionDataset {
    MatrixXd inputs;   // N x (d_x + d_u)
    MatrixXd targets;  // N x d_x

    long size() const { return inputs.rows(); }
    int input_dim() const { return static_cast<int>(inputs.cols()); }
    int output_dim() const { return static_cast<int>(targets.cols()); }
    void validate() const;
};

// Independent zero-mean GPs per output dimension with a shared kernel.
// Immutable after fit; predict/linearize are read-only.
class GpPosterior {
public:
    // N = 0 yields the prior. Gram factorization retries once with
    // 1e-8 * signal_variance jitter, then fails.
    static GpPosterior fit(TransitionDataset dataset, SeKernel kernel, VectorXd noise_variances);

    const SeKernel& kernel() const { return kernel_; }
    const TransitionDataset& dataset() const { return dataset_; }
    const VectorXd& noise_variances() const { return noise_variances_; }
    int input_dim() const { return static_cast<int>(kernel_.lengthscales.size()); }
    int output_dim() const { return static_cast<int>(noise_variances_.size()); }

    struct Prediction {
        VectorXd mean;      // length d_x
        VectorXd variance;  // length d_x, clipped at zero
    };
    Prediction predict(const VectorXd& q) const;

    // Law of the Jacobian d f / d q at q_star. Row i has mean dk(q_star, X) w_i
    // and covariance sf^2 diag(1/l^2) - dk (Gram + noise_i)^-1 dk'; rows are
    // independent, so the vec(S) covariance is block diagonal in the
    // column-major layout. Kronecker factors are attached when all row blocks
    // are proportional.
    GaussianParameterLaw linearize(const VectorXd& q_star) const;

    // diag(noise_variances), the point estimate used as the process noise.
    MatrixXd process_noise_estimate() const;

private:
    GpPosterior() = default;

    SeKernel kernel_;
    TransitionDataset dataset_;
    VectorXd noise_variances_;
    std::vector<Eigen::LLT<MatrixXd>> factors_;  // one per output
    MatrixXd weights_;                           // N x d_x, (Gram + noise_i)^-1 y_i per column
};

// Shifts the mean's state block by the identity: use when the fitted targets
// were successor-state deltas rather than raw successor states.
GaussianParameterLaw delta_adjusted(const GaussianParameterLaw& law);

}  // namespace prc
