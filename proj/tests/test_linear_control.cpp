#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "prc/linear_control.hpp"

using prc::CostWeights;
using prc::Gain;
using prc::LinearSystem;
using prc::MatrixXd;
using prc::VectorXd;

namespace {

LinearSystem scalar_system(double a, double b) {
    LinearSystem sys;
    sys.a = a * MatrixXd::Ones(1, 1);
    sys.b = b * MatrixXd::Ones(1, 1);
    return sys;
}

CostWeights scalar_weights(double q, double r, double sw) {
    CostWeights w;
    w.q = q * MatrixXd::Ones(1, 1);
    w.r = r * MatrixXd::Ones(1, 1);
    w.sigma_w = sw * MatrixXd::Ones(1, 1);
    return w;
}

}  // namespace

TEST_CASE("spectral radius of companion and rotation matrices") {
    MatrixXd rot(2, 2);
    const double th = 0.7;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    CHECK(prc::spectral_radius(0.8 * rot) == doctest::Approx(0.8).epsilon(1e-12));

    // Companion matrix of z^2 - z - 1: dominant root is the golden ratio.
    MatrixXd comp(2, 2);
    comp << 1.0, 1.0, 1.0, 0.0;
    CHECK(prc::spectral_radius(comp) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-12));

    CHECK(prc::spectral_radius(MatrixXd::Zero(3, 3)) == 0.0);
}

TEST_CASE("stability counts a unit spectral radius as unstable") {
    CHECK(prc::is_stable(scalar_system(0.999, 0.0), Gain{MatrixXd::Zero(1, 1)}));
    CHECK_FALSE(prc::is_stable(scalar_system(1.0, 0.0), Gain{MatrixXd::Zero(1, 1)}));
    CHECK_FALSE(prc::is_stable(scalar_system(1.2, 0.0), Gain{MatrixXd::Zero(1, 1)}));
    // b k can stabilize an unstable a.
    CHECK(prc::is_stable(scalar_system(1.2, 1.0), Gain{-1.0 * MatrixXd::Ones(1, 1)}));
}

TEST_CASE("scalar dare matches the quadratic formula solution") {
    // a=1, b=1, q=1, r=1: P solves P = 1 + P - P^2/(1+P)  ->  P = golden ratio.
    const LinearSystem sys = scalar_system(1.0, 1.0);
    const CostWeights w = scalar_weights(1.0, 1.0, 1.0);
    const prc::DareSolution sol = prc::dare_solve(sys, w);
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(sol.p(0, 0) == doctest::Approx(phi).epsilon(1e-9));
    // K = -(r + b'Pb)^{-1} b'Pa.
    CHECK(sol.k_ce.k(0, 0) == doctest::Approx(-phi / (1.0 + phi)).epsilon(1e-9));
}

TEST_CASE("dare with zero dynamics returns q and zero gain") {
    LinearSystem sys;
    sys.a = MatrixXd::Zero(3, 3);
    sys.b = MatrixXd::Identity(3, 3);
    CostWeights w;
    w.q = MatrixXd::Identity(3, 3) * 2.0;
    w.r = MatrixXd::Identity(3, 3);
    w.sigma_w = MatrixXd::Identity(3, 3);
    const prc::DareSolution sol = prc::dare_solve(sys, w);
    CHECK((sol.p - w.q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(sol.k_ce.k.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dare solution satisfies its own fixed point equation") {
    LinearSystem sys;
    sys.a = MatrixXd(2, 2);
    sys.a << 1.01, 0.1, 0.0, 0.97;
    sys.b = MatrixXd(2, 1);
    sys.b << 0.0, 1.0;
    CostWeights w;
    w.q = MatrixXd::Identity(2, 2);
    w.r = MatrixXd::Ones(1, 1) * 0.1;
    w.sigma_w = MatrixXd::Identity(2, 2);
    const prc::DareSolution sol = prc::dare_solve(sys, w);
    const MatrixXd residual =
        sys.a.transpose() * sol.p * sys.a - sol.p -
        sys.a.transpose() * sol.p * sys.b *
            (w.r + sys.b.transpose() * sol.p * sys.b).inverse() * sys.b.transpose() * sol.p * sys.a +
        w.q;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(prc::is_stable(sys, sol.k_ce));
}

TEST_CASE("dare rejects unstabilizable pairs") {
    // a = 2 with no input authority cannot be stabilized.
    const LinearSystem sys = scalar_system(2.0, 0.0);
    const CostWeights w = scalar_weights(1.0, 1.0, 1.0);
    CHECK_THROWS_AS(prc::dare_solve(sys, w), prc::NumericalError);
}

TEST_CASE("scalar stein equation has the geometric series solution") {
    // P = w + a^2 P  ->  P = w / (1 - a^2); a = 0.5, w = 1  ->  4/3.
    const MatrixXd p = prc::dlyap_solve(0.5 * MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
    CHECK(p(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("matrix stein solution satisfies the equation") {
    MatrixXd a_cl(2, 2);
    a_cl << 0.6, 0.3, -0.2, 0.5;
    MatrixXd w(2, 2);
    w << 1.0, 0.2, 0.2, 2.0;
    const MatrixXd p = prc::dlyap_solve(a_cl, w);
    CHECK((p - w - a_cl.transpose() * p * a_cl).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(prc::min_eigenvalue(p) > 0.0);
}

TEST_CASE("lyapunov cost equals the scalar closed form") {
    // a_cl = a + b k = 0.5, per-step cost = (q + k^2 r) sigma / (1 - a_cl^2).
    const LinearSystem sys = scalar_system(1.0, 1.0);
    const CostWeights w = scalar_weights(1.0, 2.0, 0.3);
    const Gain k{-0.5 * MatrixXd::Ones(1, 1)};
    const double expected = (1.0 + 0.25 * 2.0) * 0.3 / (1.0 - 0.25);
    CHECK(prc::lyapunov_cost(sys, k, w) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("lyapunov cost of an unstable loop is infinite") {
    const LinearSystem sys = scalar_system(1.5, 0.0);
    const CostWeights w = scalar_weights(1.0, 1.0, 1.0);
    CHECK(std::isinf(prc::lyapunov_cost(sys, Gain{MatrixXd::Zero(1, 1)}, w)));
}

TEST_CASE("finite horizon cost converges to the stationary cost") {
    LinearSystem sys;
    sys.a = MatrixXd(2, 2);
    sys.a << 0.9, 0.2, 0.0, 0.8;
    sys.b = MatrixXd::Identity(2, 2);
    CostWeights w;
    w.q = MatrixXd::Identity(2, 2);
    w.r = MatrixXd::Identity(2, 2);
    w.sigma_w = 0.01 * MatrixXd::Identity(2, 2);
    const Gain k{-0.1 * MatrixXd::Identity(2, 2)};
    const double stationary = prc::lyapunov_cost(sys, k, w);
    const double horizon = prc::finite_horizon_expected_cost(sys, k, w, VectorXd::Zero(2), 20000);
    CHECK(horizon == doctest::Approx(stationary).epsilon(1e-2));
    // And the time average from below: transient from x0 = 0 only adds less cost.
    CHECK(horizon <= stationary * (1.0 + 1e-9));
}

TEST_CASE("finite horizon cost of an unstable loop saturates instead of overflowing") {
    const LinearSystem sys = scalar_system(2.0, 0.0);
    const CostWeights w = scalar_weights(1.0, 1.0, 1.0);
    const double cost =
        prc::finite_horizon_expected_cost(sys, Gain{MatrixXd::Zero(1, 1)}, w, VectorXd::Ones(1), 5000);
    CHECK(cost == prc::kCostCeiling);
}

TEST_CASE("finite horizon cost with zero noise from a known start") {
    // x_{t+1} = 0.5 x_t, cost sum q x_t^2 over t = 0..T-1 divided by T.
    const LinearSystem sys = scalar_system(0.5, 0.0);
    const CostWeights w = scalar_weights(1.0, 1.0, 0.0);
    const long t = 50;
    const double expected = (1.0 / (1.0 - 0.25)) / t;  // geometric series, fully decayed
    const double got =
        prc::finite_horizon_expected_cost(sys, Gain{MatrixXd::Zero(1, 1)}, w, VectorXd::Ones(1), t);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("validation rejects malformed inputs") {
    LinearSystem bad;
    bad.a = MatrixXd::Zero(2, 3);
    bad.b = MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(bad.validate(), prc::DomainError);

    CostWeights w;
    w.q = MatrixXd::Identity(2, 2);
    w.r = MatrixXd::Zero(1, 1);  // must be PD
    w.sigma_w = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(w.validate(2, 1), prc::DomainError);

    CostWeights off_diag_noise;
    off_diag_noise.q = MatrixXd::Identity(2, 2);
    off_diag_noise.r = MatrixXd::Identity(1, 1);
    off_diag_noise.sigma_w = MatrixXd::Identity(2, 2);
    off_diag_noise.sigma_w(0, 1) = 0.1;
    CHECK_THROWS_AS(off_diag_noise.validate(2, 1), prc::DomainError);
}
