#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prc/distributions.hpp"
#include "prc/linear_control.hpp"
#include "prc/rng.hpp"
#include "prc/sdp.hpp"

namespace prc {

// A finite bundle of sampled systems the scenario program constrains, plus
// enough provenance to re-draw or re-check it. Two sources exist:
//  - "truncated-law": i.i.d. draws from the credible ellipsoid; membership is
//    re-checkable via mahalanobis_sq(S_i) <= radius_sq.
//  - "confidence-box": corners of the per-entry central confidence box (the
//    worst-case baseline); members satisfy |S_ij - mean_ij| = z * std_ij.
struct ScenarioSet {
    std::vector<LinearSystem> systems;
    int d_x = 0;
    int d_u = 0;
    std::uint64_t law_hash = 0;
    std::uint64_t seed = 0;
    std::string source;

    long size() const { return static_cast<long>(systems.size()); }
    void validate() const;
};

// m i.i.d. scenarios from the credible ellipsoid.
ScenarioSet draw_scenarios(const TruncatedLaw& tlaw, long m, std::uint64_t seed, int jobs = 0);

// m random corners of the per-entry confidence box: each scenario takes
// mean_ij + s_ij * z * std_ij with independent random signs s_ij, where
// std_ij is the marginal standard deviation and z the two-sided normal
// quantile covering per-entry mass `credibility`. The box ignores parameter
// correlations, so its corners are far outside the credible ellipsoid of the
// same mass; a common Lyapunov function over them reproduces the
// conservatism of worst-case designs built from per-entry error bounds.
ScenarioSet confidence_box_scenarios(const GaussianParameterLaw& law, double credibility, long m,
                                     std::uint64_t seed);

struct InitResult {
    bool feasible = false;
    Gain k;          // valid iff feasible
    MatrixXd y;      // common Lyapunov-like certificate, valid iff feasible
    double ub = 0.0; // scenario objective trace(Z*), valid iff feasible
};

// Scenario initialization: minimize trace(Z) over (L, Z, Y) subject to one
// stability/performance LMI per scenario sharing Y, the noise coupling block
// [[Z, Sw^(1/2)], [Sw^(1/2), Y]] >= 0, and Y >= delta I. Recovers
// K = L Y^(-1) and re-checks every scenario closed loop outside the solver.
// Infeasibility is an expected outcome and is reported through the flag;
// solver breakdown throws NumericalError.
InitResult synth_init(const ScenarioSet& scenarios, const CostWeights& weights,
                      const sdp::Settings& solver = sdp::Settings{});

// First-order expansion of the matrix inverse around x_bar:
// T(x) = 2 x_bar^(-1) - x_bar^(-1) x x_bar^(-1). For PD x it lower-bounds
// x^(-1) in the PSD order, which is what makes the improvement step an upper
// bound of the true per-scenario cost.
MatrixXd linearized_inverse_apply(const MatrixXd& x_bar, const MatrixXd& x);

struct ImproveResult {
    bool feasible = false;
    Gain k;
    std::vector<MatrixXd> xs;  // per-scenario cost certificates
    double objective = 0.0;    // (1/M) sum_i trace(X_i Sw)
};

// One majorize-minimize step: minimize the averaged certificate trace subject
// to per-scenario LMIs in (K, X_i) with the inverse linearized at x_bars.
// Infeasibility at x_bars that came from a feasible iterate signals MM
// breakdown; the caller falls back to the best verified gain.
ImproveResult synth_improve_step(const ScenarioSet& scenarios, const CostWeights& weights,
                                 const std::vector<MatrixXd>& x_bars,
                                 const sdp::Settings& solver = sdp::Settings{});

struct StopRule {
    double rel_tol = 1e-4;
    int max_iter = 20;
};

struct IterateResult {
    Gain k;
    std::vector<double> trace;  // objective per iteration, trace[0] = init ub
    bool mm_breakdown = false;
};

// Runs improvement steps from the initialization until the relative decrease
// drops below rel_tol or max_iter steps. Each accepted step is re-verified
// (scenario stability, PD certificates, non-increasing objective); a failed
// step returns the best previously verified gain with mm_breakdown set.
IterateResult synth_iterate(const ScenarioSet& scenarios, const CostWeights& weights,
                            const InitResult& init, const StopRule& stop = StopRule{},
                            const sdp::Settings& solver = sdp::Settings{});

struct ValidationReport {
    double empirical_stability = 0.0;
    long m_validation = 0;
    bool pass = false;
    double rho_min = 0.0;
    double rho_median = 0.0;
    double rho_max = 0.0;
    std::uint64_t seed = 0;
};

// Monte Carlo certificate check: m_validation fresh draws from the credible
// ellipsoid, phi_hat = stable fraction, pass iff phi_hat >= 1 - eps. The
// sample count is the Hoeffding bound for (eps_val, alpha).
ValidationReport validate(const Gain& k, const TruncatedLaw& tlaw, const RiskProfile& profile,
                          std::uint64_t seed, int jobs = 0);

struct SeedProvenance {
    std::uint64_t root = 0;
    std::uint64_t scenario = 0;
    std::uint64_t validation = 0;
};

struct CertifiedController {
    Gain k;
    RiskProfile profile;
    long m_scenarios = 0;
    long m_validation = 0;
    double empirical_stability = 0.0;
    double guaranteed_stability_prob = 0.0;  // c - eps - eps_val
    double confidence = 0.0;                 // 1 - alpha
    std::vector<double> objective_trace;
    SeedProvenance seeds;
    int attempts = 1;  // scenario draws consumed, including the accepted one
};

enum class SynthesisOutcome { Certified, InfeasibleInit, RestartsExhausted };

const char* to_string(SynthesisOutcome o);

struct SynthesisOptions {
    StopRule stop;
    sdp::Settings solver;
    int max_restarts = 10;  // total scenario draws attempted
    int jobs = 0;
};

struct SynthesisResult {
    SynthesisOutcome outcome;
    std::optional<CertifiedController> controller;          // set iff Certified
    std::optional<ValidationReport> last_validation;        // set unless InfeasibleInit
    int attempts = 0;
};

// Full certification loop: draw M scenarios, initialize, improve, validate;
// redraw both sets and repeat while validation fails, up to max_restarts
// draws. Scenario and validation streams are disjoint substreams of seed and
// are recorded in the certificate. An infeasible initialization returns
// immediately; only failed validations are retried.
SynthesisResult algorithm1(const TruncatedLaw& tlaw, const RiskProfile& profile,
                           const CostWeights& weights, std::uint64_t seed,
                           const SynthesisOptions& options = SynthesisOptions{});

}  // namespace prc
