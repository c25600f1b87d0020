#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "prc/distributions.hpp"
#include "prc/rng.hpp"

using prc::MatrixXd;
using prc::VectorXd;

namespace {

// Trapezoid integration of the chi2 density, an oracle independent of the
// incomplete-gamma evaluation behind gamma_p.
double chi2_cdf_trapezoid(int dof, double x) {
    const long n = 200000;
    const double h = x / n;
    const double k = dof / 2.0;
    const double log_norm = -k * std::log(2.0) - std::lgamma(k);
    auto density = [&](double t) {
        if (t <= 0.0) return 0.0;
        return std::exp(log_norm + (k - 1.0) * std::log(t) - t / 2.0);
    };
    double acc = 0.5 * (density(0.0) + density(x));
    for (long i = 1; i < n; ++i) acc += density(i * h);
    return acc * h;
}

}  // namespace

TEST_CASE("chi2 quantile matches frozen references") {
    // Frozen reference values (dof, p, x): chi2.ppf from a table.
    CHECK(prc::chi2_quantile(1, 0.5) == doctest::Approx(0.454936423119572).epsilon(1e-9));
    CHECK(prc::chi2_quantile(1, 0.95) == doctest::Approx(3.841458820694124).epsilon(1e-9));
    CHECK(prc::chi2_quantile(1, 0.98) == doctest::Approx(5.411894431054342).epsilon(1e-9));
    CHECK(prc::chi2_quantile(3, 0.95) == doctest::Approx(7.814727903251179).epsilon(1e-9));
    CHECK(prc::chi2_quantile(18, 0.98) == doctest::Approx(32.34616093033884).epsilon(1e-9));
    CHECK(prc::chi2_quantile(18, 0.95) == doctest::Approx(28.869299430392623).epsilon(1e-9));
}

TEST_CASE("chi2 quantile inverts an independently integrated CDF") {
    // dof = 1 has an integrable singularity at zero, so the trapezoid rule is
    // only trusted for dof >= 2; the closed form covers dof = 1.
    for (const double p : {0.2, 0.9, 0.98}) {
        const double x = prc::chi2_quantile(1, p);
        CHECK(std::erf(std::sqrt(x / 2.0)) == doctest::Approx(p).epsilon(1e-9));
    }
    for (const int dof : {4, 18}) {
        for (const double p : {0.2, 0.9, 0.98}) {
            const double x = prc::chi2_quantile(dof, p);
            CHECK(chi2_cdf_trapezoid(dof, x) == doctest::Approx(p).epsilon(1e-6));
        }
    }
}

TEST_CASE("gamma_p hits known special values") {
    // P(1/2, x/2) = erf(sqrt(x/2)) and P(1, x) = 1 - exp(-x).
    CHECK(prc::gamma_p(0.5, 1.0) == doctest::Approx(std::erf(1.0)).epsilon(1e-12));
    CHECK(prc::gamma_p(1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
    CHECK(prc::gamma_p(5.0, 0.0) == 0.0);
}

TEST_CASE("scenario bound reproduces the certification count") {
    // d_x = d_u = 3: n_k = 2*9 + 9 = 27, M = ceil(100 ln 50) + fits 188... exact:
    CHECK(prc::n_k_for(3, 3) == 27);
    CHECK(prc::scenario_sample_bound(0.02, 0.20, 27) == 188);
    CHECK(prc::scenario_sample_bound(0.02, 0.20, 1) == 162);
    CHECK_THROWS_AS(prc::scenario_sample_bound(0.02, 0.20, 0), prc::DomainError);
    CHECK(prc::n_k_for(1, 1) == 3);
    CHECK(prc::scenario_sample_bound(0.1, 0.5, 3) == 17);
}

TEST_CASE("validation bound reproduces the certification count") {
    CHECK(prc::hoeffding_sample_bound(0.01, 0.001) == 34539);
    CHECK(prc::hoeffding_sample_bound(0.05, 0.01) == 922);
    CHECK(prc::hoeffding_sample_bound(0.5, 0.9) == 1);
}

TEST_CASE("sample bounds are monotone in their risk parameters") {
    long prev = prc::scenario_sample_bound(0.5, 0.2, 5);
    for (const double eps : {0.2, 0.1, 0.05, 0.02}) {
        const long m = prc::scenario_sample_bound(eps, 0.2, 5);
        CHECK(m > prev);
        prev = m;
    }
    CHECK(prc::hoeffding_sample_bound(0.01, 0.001) > prc::hoeffding_sample_bound(0.02, 0.001));
    CHECK(prc::hoeffding_sample_bound(0.01, 0.001) > prc::hoeffding_sample_bound(0.01, 0.01));
}

TEST_CASE("risk profile validation rejects vacuous certificates") {
    prc::RiskProfile good{0.98, 0.02, 0.20, 0.01, 0.001};
    CHECK_NOTHROW(good.validate());
    prc::RiskProfile vacuous{0.10, 0.08, 0.20, 0.05, 0.001};  // eps + eps_val >= c
    CHECK_THROWS_AS(vacuous.validate(), prc::DomainError);
    prc::RiskProfile out_of_range{1.5, 0.02, 0.20, 0.01, 0.001};
    CHECK_THROWS_AS(out_of_range.validate(), prc::DomainError);
}

TEST_CASE("gaussian law sampling matches its moments") {
    const int d_x = 2, d_u = 1;
    MatrixXd mean(2, 3);
    mean << 0.9, 0.1, 1.0, -0.2, 0.8, 0.5;
    MatrixXd cov = MatrixXd::Zero(6, 6);
    for (int i = 0; i < 6; ++i) cov(i, i) = 0.01 * (i + 1);
    cov(0, 1) = cov(1, 0) = 0.002;
    const prc::GaussianParameterLaw law(d_x, d_u, mean, cov);

    prc::RngEngine rng(11);
    const long n = 40000;
    MatrixXd sum = MatrixXd::Zero(2, 3);
    MatrixXd outer = MatrixXd::Zero(6, 6);
    for (long i = 0; i < n; ++i) {
        const MatrixXd s = law.sample(rng);
        sum += s;
        const VectorXd d = prc::vec(s - mean);
        outer += d * d.transpose();
    }
    CHECK(((sum / n) - mean).cwiseAbs().maxCoeff() < 5e-3);
    CHECK(((outer / n) - cov).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("mahalanobis of the mean is zero and grows with distance") {
    MatrixXd mean = MatrixXd::Zero(1, 2);
    const prc::GaussianParameterLaw law(1, 1, mean, 0.25 * MatrixXd::Identity(2, 2));
    CHECK(law.mahalanobis_sq(mean) == doctest::Approx(0.0));
    MatrixXd s(1, 2);
    s << 0.5, 0.0;  // one standard deviation out
    CHECK(law.mahalanobis_sq(s) == doctest::Approx(1.0).epsilon(1e-10));
    s << 1.0, 0.0;
    CHECK(law.mahalanobis_sq(s) == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("kron factors must multiply back to the covariance") {
    MatrixXd mean = MatrixXd::Zero(1, 2);
    MatrixXd u = MatrixXd::Identity(1, 1);
    MatrixXd v = 2.0 * MatrixXd::Identity(2, 2);
    CHECK_NOTHROW(prc::GaussianParameterLaw(1, 1, mean, 2.0 * MatrixXd::Identity(2, 2), u, v));
    CHECK_THROWS_AS(prc::GaussianParameterLaw(1, 1, mean, MatrixXd::Identity(2, 2), u, v),
                    prc::DomainError);
}

TEST_CASE("truncated sampler stays inside the credible ellipsoid") {
    MatrixXd mean(1, 2);
    mean << 1.0, -1.0;
    MatrixXd cov(2, 2);
    cov << 0.04, 0.01, 0.01, 0.09;
    const prc::TruncatedLaw tlaw(prc::GaussianParameterLaw(1, 1, mean, cov), 0.98);

    prc::RngEngine rng(5);
    prc::RejectionCounter counter;
    for (int i = 0; i < 10000; ++i) {
        const MatrixXd s = prc::sample_truncated(tlaw, rng, &counter);
        CHECK(tlaw.contains(s));
    }
    // Acceptance rate concentrates near the credibility level.
    CHECK(counter.acceptance_rate() > 0.96);
    CHECK(counter.acceptance_rate() <= 1.0);
}

TEST_CASE("truncation radius follows the chi2 quantile of d_s degrees") {
    MatrixXd mean = MatrixXd::Zero(2, 3);
    const prc::GaussianParameterLaw law(2, 1, mean, MatrixXd::Identity(6, 6));
    const prc::TruncatedLaw tlaw(law, 0.9);
    CHECK(tlaw.radius_sq() == doctest::Approx(prc::chi2_quantile(6, 0.9)).epsilon(1e-12));
}

TEST_CASE("wishart sample mean approaches dof times scale") {
    MatrixXd scale(2, 2);
    scale << 1.0, 0.3, 0.3, 0.5;
    const int dof = 7;
    prc::RngEngine rng(3);
    MatrixXd acc = MatrixXd::Zero(2, 2);
    const long n = 20000;
    for (long i = 0; i < n; ++i) {
        const MatrixXd w = prc::sample_wishart(scale, dof, rng);
        CHECK(prc::min_eigenvalue(w) > -1e-12);
        acc += w;
    }
    const MatrixXd mean = acc / n;
    CHECK((mean - dof * scale).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("wishart rejects deficient degrees of freedom") {
    prc::RngEngine rng(1);
    CHECK_THROWS_AS(prc::sample_wishart(MatrixXd::Identity(3, 3), 2, rng), prc::DomainError);
}

TEST_CASE("sampling is reproducible from the substream seed") {
    MatrixXd mean = MatrixXd::Zero(2, 3);
    const prc::GaussianParameterLaw law(2, 1, mean, MatrixXd::Identity(6, 6));
    prc::RngEngine a = prc::substream_engine(42, prc::stream_salt::kScenario, 17);
    prc::RngEngine b = prc::substream_engine(42, prc::stream_salt::kScenario, 17);
    prc::RngEngine c = prc::substream_engine(42, prc::stream_salt::kScenario, 18);
    const MatrixXd sa = law.sample(a);
    const MatrixXd sb = law.sample(b);
    const MatrixXd sc = law.sample(c);
    CHECK((sa - sb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sa - sc).cwiseAbs().maxCoeff() != 0.0);
}

TEST_CASE("law content hash tracks content") {
    MatrixXd mean = MatrixXd::Zero(1, 2);
    const prc::GaussianParameterLaw a(1, 1, mean, MatrixXd::Identity(2, 2));
    const prc::GaussianParameterLaw b(1, 1, mean, MatrixXd::Identity(2, 2));
    MatrixXd mean2 = mean;
    mean2(0, 0) = 1e-9;
    const prc::GaussianParameterLaw c(1, 1, mean2, MatrixXd::Identity(2, 2));
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != c.content_hash());
}
