#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "prc/linalg.hpp"
#include "prc/sdp.hpp"

using prc::MatrixXd;
using prc::VectorXd;
namespace sdp = prc::sdp;

namespace {

// min tr(Z) s.t. [[Z, A],[A', I]] >= 0, i.e. Z >= A A'. Optimum Z* = A A'.
sdp::Problem schur_toy(const MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    sdp::Problem prob;
    const int z = prob.add_symmetric(n, "Z");
    sdp::Lmi& lmi = prob.add_lmi(n + m);
    lmi.var_block(0, 0, z);
    lmi.constant(n, 0, a.transpose());
    lmi.constant(n, n, MatrixXd::Identity(m, m));
    prob.set_objective_min({{z, MatrixXd::Identity(n, n)}});
    return prob;
}

}  // namespace

TEST_CASE("schur complement toy reaches its analytic optimum") {
    MatrixXd a(3, 3);
    a << 1.0 / std::sqrt(2.0), 0, 0, 0, 1.0 / std::sqrt(2.0), 0, 0, 0, 1.0 / std::sqrt(2.0);
    const sdp::Problem prob = schur_toy(a);
    const sdp::Solution sol = prob.solve();

    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(1.5).epsilon(1e-5));
    const MatrixXd z = sol.values.at(0);
    CHECK((z - 0.5 * MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-4);
    // Returned point must actually satisfy the constraint it optimized.
    CHECK(prc::min_eigenvalue(z - a * a.transpose()) > -1e-6);
}

TEST_CASE("non-identity target is recovered exactly") {
    MatrixXd a(2, 2);
    a << 1.0, 0.3, 0.0, 0.5;
    const sdp::Solution sol = schur_toy(a).solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    const MatrixXd target = a * a.transpose();
    CHECK(sol.objective == doctest::Approx(target.trace()).epsilon(1e-5));
    CHECK((sol.values.at(0) - target).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("scalar variable placed twice on the diagonal") {
    // min x s.t. [[x, 1],[1, x]] >= 0  ->  x* = 1.
    sdp::Problem prob;
    const int x = prob.add_symmetric(1, "x");
    sdp::Lmi& lmi = prob.add_lmi(2);
    lmi.var_block(0, 0, x);
    lmi.var_block(1, 1, x);
    lmi.constant(1, 0, MatrixXd::Ones(1, 1));
    prob.set_objective_min({{x, MatrixXd::Identity(1, 1)}});
    const sdp::Solution sol = prob.solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("contradictory scalar bounds are reported infeasible") {
    // x >= 2 (via [[x,2],[2,x]] >= 0) and x <= 1 simultaneously.
    sdp::Problem prob;
    const int x = prob.add_symmetric(1, "x");
    sdp::Lmi& band = prob.add_lmi(2);
    band.var_block(0, 0, x);
    band.var_block(1, 1, x);
    band.constant(1, 0, 2.0 * MatrixXd::Ones(1, 1));
    sdp::Lmi& cap = prob.add_lmi(1);
    cap.constant(0, 0, MatrixXd::Ones(1, 1));
    cap.var_block(0, 0, x, -1.0);
    prob.set_objective_min({{x, MatrixXd::Identity(1, 1)}});
    CHECK(prob.solve().status == sdp::Status::Infeasible);
}

TEST_CASE("rectangular variable with mirrored transposed placement") {
    // max v1 over ||v|| <= 1 via [[I, v],[v', 1]] >= 0  ->  v* = e1.
    sdp::Problem prob;
    const int v = prob.add_rectangular(2, 1, "v");
    sdp::Lmi& lmi = prob.add_lmi(3);
    lmi.constant(0, 0, MatrixXd::Identity(2, 2));
    lmi.var_block(2, 0, v, 1.0, /*transposed=*/true);
    lmi.constant(2, 2, MatrixXd::Ones(1, 1));
    MatrixXd w(2, 1);
    w << -1.0, 0.0;
    prob.set_objective_min({{v, w}});
    const sdp::Solution sol = prob.solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(sol.values.at(0)(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(sol.values.at(0)(1, 0)) < 1e-3);
}

TEST_CASE("left and right multipliers scale a term") {
    // min x s.t. 2*x*3 - 12 >= 0  ->  x* = 2, via term(left=[2], right=[3]).
    sdp::Problem prob;
    const int x = prob.add_symmetric(1, "x");
    sdp::Lmi& lmi = prob.add_lmi(1);
    lmi.term(0, 0, x, 2.0 * MatrixXd::Ones(1, 1), 3.0 * MatrixXd::Ones(1, 1));
    lmi.constant(0, 0, -12.0 * MatrixXd::Ones(1, 1));
    prob.set_objective_min({{x, MatrixXd::Identity(1, 1)}});
    const sdp::Solution sol = prob.solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("two one-sided constraints pin a boundary solution") {
    // x >= 3 and x <= 3  ->  feasible set is the single point x = 3.
    sdp::Problem prob;
    const int x = prob.add_symmetric(1, "x");
    sdp::Lmi& lo = prob.add_lmi(1);
    lo.var_block(0, 0, x);
    lo.constant(0, 0, -3.0 * MatrixXd::Ones(1, 1));
    sdp::Lmi& hi = prob.add_lmi(1);
    hi.var_block(0, 0, x, -1.0);
    hi.constant(0, 0, 3.0 * MatrixXd::Ones(1, 1));
    prob.set_objective_min({{x, MatrixXd::Identity(1, 1)}});
    const sdp::Solution sol = prob.solve();
    // A zero-volume interior is the one shape a strict barrier cannot enter;
    // accept the exact answer or an honest refusal, never a wrong answer.
    if (sol.status == sdp::Status::Optimal)
        CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-4));
    else
        CHECK(sol.status != sdp::Status::Infeasible);
}

TEST_CASE("empty problem returns the objective offset") {
    sdp::Problem prob;
    prob.set_objective_min({}, 4.25);
    const sdp::Solution sol = prob.solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == 4.25);
}

TEST_CASE("objective offset is added to trace terms") {
    MatrixXd a = 0.5 * MatrixXd::Identity(2, 2);
    sdp::Problem prob;
    const int z = prob.add_symmetric(2, "Z");
    sdp::Lmi& lmi = prob.add_lmi(4);
    lmi.var_block(0, 0, z);
    lmi.constant(2, 0, a.transpose());
    lmi.constant(2, 2, MatrixXd::Identity(2, 2));
    prob.set_objective_min({{z, MatrixXd::Identity(2, 2)}}, 10.0);
    const sdp::Solution sol = prob.solve();
    REQUIRE(sol.status == sdp::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(10.5).epsilon(1e-5));
}

TEST_CASE("repeated solves are bitwise deterministic") {
    MatrixXd a(2, 2);
    a << 0.9, 0.2, -0.1, 0.6;
    const sdp::Solution s1 = schur_toy(a).solve();
    const sdp::Solution s2 = schur_toy(a).solve();
    REQUIRE(s1.status == sdp::Status::Optimal);
    REQUIRE(s2.status == sdp::Status::Optimal);
    CHECK(s1.objective == s2.objective);
    CHECK((s1.values.at(0) - s2.values.at(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dump lists coefficients and objective entries") {
    MatrixXd a = MatrixXd::Identity(2, 2);
    const sdp::Problem prob = schur_toy(a);
    std::ostringstream os;
    prob.dump(os);
    const std::string text = os.str();
    CHECK(text.find("const") != std::string::npos);
    CHECK(text.find("obj") != std::string::npos);
    CHECK(text.find("v0") != std::string::npos);
}

TEST_CASE("unconstrained direction is reported as unbounded-ill or hits iteration limit") {
    // min x with only x >= 0 from below reversed: min -x s.t. x >= 0 is unbounded.
    sdp::Problem prob;
    const int x = prob.add_symmetric(1, "x");
    sdp::Lmi& lmi = prob.add_lmi(1);
    lmi.var_block(0, 0, x);
    prob.set_objective_min({{x, -MatrixXd::Identity(1, 1)}});
    sdp::Settings s;
    s.max_iter = 2000;
    const sdp::Solution sol = prob.solve(s);
    CHECK(sol.status != sdp::Status::Optimal);
    CHECK(sol.status != sdp::Status::Infeasible);
}
