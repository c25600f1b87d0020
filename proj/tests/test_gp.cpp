#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "prc/gp.hpp"
#include "prc/rng.hpp"

using prc::GpPosterior;
using prc::MatrixXd;
using prc::SeKernel;
using prc::TransitionDataset;
using prc::VectorXd;

namespace {

SeKernel default_kernel(int dim, double sf2 = 1.0, double ell = 1.0) {
    return SeKernel{sf2, VectorXd::Constant(dim, ell)};
}

TransitionDataset random_dataset(long n, int d_q, int d_x, std::uint64_t seed) {
    prc::RngEngine rng(seed);
    TransitionDataset data;
    data.inputs = MatrixXd::NullaryExpr(
        n, d_q, [&](Eigen::Index, Eigen::Index) { return std::normal_distribution<>()(rng); });
    data.targets = MatrixXd::NullaryExpr(
        n, d_x, [&](Eigen::Index, Eigen::Index) { return std::normal_distribution<>()(rng); });
    return data;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Jacobian of the posterior-mean map by central differences.
MatrixXd fd_mean_jacobian(const GpPosterior& gp, const VectorXd& q, double h) {
    MatrixXd jac(gp.output_dim(), gp.input_dim());
    for (int j = 0; j < gp.input_dim(); ++j) {
        VectorXd hi = q, lo = q;
        hi[j] += h;
        lo[j] -= h;
        jac.col(j) = (gp.predict(hi).mean - gp.predict(lo).mean) / (2.0 * h);
    }
    return jac;
}

}  // namespace

TEST_CASE("kernel is a gaussian of the scaled distance") {
    const SeKernel k{2.0, (VectorXd(2) << 1.0, 0.5).finished()};
    VectorXd a(2), b(2);
    a << 0.0, 0.0;
    b << 1.0, 1.0;
    // r^2 = (1/1)^2 + (1/0.5)^2 = 5, value = 2 exp(-5/2).
    CHECK(k(a, b) == doctest::Approx(2.0 * std::exp(-2.5)).epsilon(1e-12));
    CHECK(k(a, a) == doctest::Approx(2.0));
    CHECK_THROWS_AS((SeKernel{1.0, (VectorXd(1) << 0.0).finished()}.validate()), prc::DomainError);
}

TEST_CASE("posterior mean interpolates noise-free data") {
    TransitionDataset data;
    data.inputs = (MatrixXd(3, 1) << -1.0, 0.0, 1.0).finished();
    data.targets = (MatrixXd(3, 1) << 0.5, -0.2, 0.9).finished();
    const GpPosterior gp =
        GpPosterior::fit(data, default_kernel(1), VectorXd::Constant(1, 1e-12));
    for (int i = 0; i < 3; ++i) {
        const auto pred = gp.predict(data.inputs.row(i).transpose());
        CHECK(pred.mean[0] == doctest::Approx(data.targets(i, 0)).epsilon(1e-6));
        CHECK(pred.variance[0] < 1e-6);
    }
}

TEST_CASE("prediction far from data reverts to the prior") {
    TransitionDataset data;
    data.inputs = MatrixXd::Zero(1, 1);
    data.targets = MatrixXd::Ones(1, 1);
    const GpPosterior gp = GpPosterior::fit(data, default_kernel(1, 3.0), VectorXd::Constant(1, 0.1));
    const auto pred = gp.predict(VectorXd::Constant(1, 50.0));
    CHECK(std::abs(pred.mean[0]) < 1e-10);
    CHECK(pred.variance[0] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("posterior matches a dense reference solve") {
    const TransitionDataset data = random_dataset(12, 2, 2, 41);
    const SeKernel kernel = default_kernel(2, 1.5, 0.8);
    const VectorXd noise = (VectorXd(2) << 0.01, 0.05).finished();
    const GpPosterior gp = GpPosterior::fit(data, kernel, noise);

    VectorXd q(2);
    q << 0.3, -0.4;
    const auto pred = gp.predict(q);

    MatrixXd gram(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            gram(i, j) = kernel(data.inputs.row(i).transpose(), data.inputs.row(j).transpose());
    VectorXd kq(12);
    for (int i = 0; i < 12; ++i) kq[i] = kernel(data.inputs.row(i).transpose(), q);
    for (int out = 0; out < 2; ++out) {
        const MatrixXd gn = gram + noise[out] * MatrixXd::Identity(12, 12);
        const VectorXd alpha = gn.fullPivLu().solve(data.targets.col(out));
        CHECK(pred.mean[out] == doctest::Approx(kq.dot(alpha)).epsilon(1e-8));
        const double var = kernel(q, q) - kq.dot(gn.fullPivLu().solve(kq));
        CHECK(pred.variance[out] == doctest::Approx(var).epsilon(1e-6));
    }
}

TEST_CASE("linearized mean matches finite differences of the posterior mean") {
    const TransitionDataset data = random_dataset(20, 3, 2, 7);
    const GpPosterior gp =
        GpPosterior::fit(data, default_kernel(3, 1.2, 1.1), VectorXd::Constant(2, 0.01));
    VectorXd q = VectorXd::Zero(3);
    q << 0.1, -0.2, 0.05;
    const prc::GaussianParameterLaw law = gp.linearize(q);
    const MatrixXd fd = fd_mean_jacobian(gp, q, 1e-4);
    CHECK((law.mean() - fd).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("prior linearization is exact") {
    // With no data the Jacobian law has zero mean and covariance
    // sf^2 diag(1/l^2) per row.
    TransitionDataset empty;
    empty.inputs = MatrixXd::Zero(0, 2);
    empty.targets = MatrixXd::Zero(0, 1);
    const SeKernel kernel{2.0, (VectorXd(2) << 1.0, 0.5).finished()};
    const GpPosterior gp = GpPosterior::fit(empty, kernel, VectorXd::Constant(1, 0.1));
    const prc::GaussianParameterLaw law = gp.linearize(VectorXd::Zero(2));
    CHECK(law.mean().cwiseAbs().maxCoeff() == 0.0);
    MatrixXd expected(2, 2);
    expected << 2.0, 0.0, 0.0, 8.0;
    CHECK((law.covariance() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian covariance shrinks as data accumulates") {
    const VectorXd q = VectorXd::Zero(2);
    double prev = std::numeric_limits<double>::infinity();
    for (const long n : {2L, 8L, 32L}) {
        TransitionDataset data = random_dataset(n, 2, 1, 13);
        data.inputs *= 0.5;  // cluster near the linearization point
        const GpPosterior gp =
            GpPosterior::fit(data, default_kernel(2), VectorXd::Constant(1, 0.01));
        const double tr = gp.linearize(q).covariance().trace();
        CHECK(tr < prev);
        prev = tr;
    }
}

TEST_CASE("jacobian law covariance is positive semidefinite") {
    const TransitionDataset data = random_dataset(25, 4, 3, 99);
    const GpPosterior gp =
        GpPosterior::fit(data, default_kernel(4, 0.7, 1.3), VectorXd::Constant(3, 1e-3));
    const prc::GaussianParameterLaw law = gp.linearize(VectorXd::Zero(4));
    CHECK(prc::min_eigenvalue(law.covariance()) > -1e-10);
    CHECK(law.d_x() == 3);
    CHECK(law.d_q() == 4);
}

TEST_CASE("equal-noise outputs produce kron factors") {
    const TransitionDataset data = random_dataset(10, 3, 2, 3);
    const GpPosterior gp =
        GpPosterior::fit(data, default_kernel(3), VectorXd::Constant(2, 0.01));
    const prc::GaussianParameterLaw law = gp.linearize(VectorXd::Zero(3));
    // Identical per-row covariance blocks factorize as kron(V, I).
    REQUIRE(law.has_kron_factors());
    const MatrixXd reconstructed = kron(law.kron_col_cov(), law.kron_row_cov());
    CHECK((reconstructed - law.covariance()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("distinct noise levels drop the kron factorization") {
    const TransitionDataset data = random_dataset(10, 3, 2, 3);
    const GpPosterior gp =
        GpPosterior::fit(data, default_kernel(3), (VectorXd(2) << 0.01, 0.5).finished());
    CHECK_FALSE(gp.linearize(VectorXd::Zero(3)).has_kron_factors());
}

TEST_CASE("delta adjustment shifts the state block of the mean by identity") {
    MatrixXd mean(2, 3);
    mean << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const prc::GaussianParameterLaw law(2, 1, mean, 0.01 * MatrixXd::Identity(6, 6));
    const prc::GaussianParameterLaw adj = prc::delta_adjusted(law);
    MatrixXd expected = mean;
    expected(0, 0) += 1.0;
    expected(1, 1) += 1.0;
    CHECK((adj.mean() - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK((adj.covariance() - law.covariance()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("process noise estimate is the diagonal of the fitted noise") {
    const TransitionDataset data = random_dataset(5, 2, 2, 21);
    const VectorXd noise = (VectorXd(2) << 0.3, 0.7).finished();
    const GpPosterior gp = GpPosterior::fit(data, default_kernel(2), noise);
    const MatrixXd est = gp.process_noise_estimate();
    CHECK(est(0, 0) == 0.3);
    CHECK(est(1, 1) == 0.7);
    CHECK(est(0, 1) == 0.0);
}

TEST_CASE("fit validates dimensions") {
    TransitionDataset data;
    data.inputs = MatrixXd::Zero(4, 2);
    data.targets = MatrixXd::Zero(3, 1);  // row mismatch
    CHECK_THROWS_AS(GpPosterior::fit(data, default_kernel(2), VectorXd::Constant(1, 0.1)),
                    prc::DomainError);
    TransitionDataset ok;
    ok.inputs = MatrixXd::Zero(4, 2);
    ok.targets = MatrixXd::Zero(4, 1);
    CHECK_THROWS_AS(GpPosterior::fit(ok, default_kernel(3), VectorXd::Constant(1, 0.1)),
                    prc::DomainError);  // lengthscale dim mismatch
}
