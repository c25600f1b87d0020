#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prc/distributions.hpp"
#include "prc/gp.hpp"
#include "prc/linear_control.hpp"
#include "prc/mc_kernels.hpp"
#include "prc/synthesis.hpp"

namespace prc::bench {

// Discrete-time plant x+ = f(x, u) + w, w ~ N(0, sigma_w), with a known
// operating point and its analytic linearization (the ground truth the "T"
// baseline and the stability grading use).
struct NonlinearPlant {
    std::string name;
    int d_x = 0;
    int d_u = 0;
    VectorXd x_star;
    VectorXd u_star;
    std::function<VectorXd(const VectorXd&, const VectorXd&)> f;  // noiseless step
    MatrixXd sigma_w;
    LinearSystem reference;  // d f / d (x,u) at the operating point

    void validate() const;  // fixed point to 1e-12, linearization vs FD to 1e-6
};

// The marginally unstable Laplacian-like benchmark: tridiagonal A with 1.01
// on the diagonal and 0.01 off it, B = I3, Q = 1e-3 I3, R = I3, and process
// noise 1e-3 I3.
std::pair<LinearSystem, CostWeights> dean_linear_system();

// Cubic variant of the same system: x+ = A x + (M x)^o3 + u + w with M
// lower-triangular of 0.3 entries and Q = R = I3. The cubic term's Jacobian
// vanishes at the origin, so the reference linearization is (A, I3).
NonlinearPlant cubic_plant();

// Parameter law with the benchmark mean and one Wishart covariance draw with
// d_x^2 + d_x d_u degrees of freedom and scale sigma_sq * (0.5 I + 0.5 ones)
// over the 18 stacked parameters. The draw is kept as the full covariance.
GaussianParameterLaw synthetic_law(double sigma_sq, RngEngine& rng);

// Excitation rollouts: each starts at x* plus N(0, init_std^2 I) and applies
// u* plus N(0, input_std^2 I) for samples_per_rollout steps, recording
// (x_k, u_k) -> x_{k+1} rows.
TransitionDataset collect_rollouts(const NonlinearPlant& plant, int samples_per_rollout,
                                   int n_rollouts, double input_std, double init_std,
                                   RngEngine& rng);

// Closed-loop grading against a sampled parameter law: n_systems draws from
// the unrestricted law, per-draw spectral radius and finite-horizon cost.
mc::CostSweep evaluate_on_law(const Gain& k, const GaussianParameterLaw& law,
                              const CostWeights& weights, long n_systems, long horizon,
                              const VectorXd& x0, std::uint64_t seed, std::uint64_t salt,
                              int jobs = 0);

// Closed-loop grading on the true plant: reps noisy trajectories from the
// operating point under u = u* + K (x - x*); per-run time-averaged cost in
// the deviation variables, flagged diverged when any |state| reaches the
// threshold. Noise realizations depend only on (seed, salt, rep), so method
// comparisons with shared seeds are paired.
struct PlantEvaluation {
    std::vector<double> run_costs;  // +infinity for diverged runs
    long diverged_count = 0;

    long reps() const { return static_cast<long>(run_costs.size()); }
    double diverged_freq() const;
    std::vector<double> finished_costs() const;
};

PlantEvaluation evaluate_on_plant(const Gain& k, const NonlinearPlant& plant,
                                  const CostWeights& weights, long horizon, long reps,
                                  double divergence_threshold, std::uint64_t seed,
                                  std::uint64_t salt, int jobs = 0);

// Experiment grid protocol. kind "synthetic-dist" sweeps sigma_grid with
// Wishart parameter laws and grades on the sampled law; kind "cubic" sweeps
// rollout_grid, learns a GP model per cell, and grades on the true plant.
struct ExperimentConfig {
    std::string kind = "synthetic-dist";
    std::vector<double> sigma_grid = {1e-6, 1e-5, 1e-4, 1e-3};
    std::vector<int> rollout_grid = {3, 5, 8};
    int repetitions = 5;
    RiskProfile profile{0.98, 0.02, 0.20, 0.01, 0.001};
    double r_credibility = 0.95;
    long n_eval_systems = 1000;
    long horizon = 200;
    long n_true_reps = 200;
    int samples_per_rollout = 6;
    double input_std = 0.1;
    double init_std = 0.01;
    double divergence_threshold = 1000.0;
    double gp_signal_variance = 4.0;
    VectorXd gp_lengthscales;     // empty = 2.0 per input dimension
    VectorXd gp_noise_variances;  // empty = 1e-3 per output dimension
    bool gp_regress_deltas = false;
    SynthesisOptions synthesis;
    std::uint64_t seed = 0;
    bool record_runtimes = false;

    void validate() const;
    void apply_paper_scale();  // 10,000 evaluation systems, 25 repetitions
};

// One synthesized-and-graded method inside a cell. Cost summaries cover the
// stable (respectively non-diverged) samples only; the unstable share is
// reported separately. All quantities are recomputable from raw_costs,
// n_unstable, and n_samples.
struct MethodResult {
    std::string method;  // PR | CE | R | T
    bool feasible = false;
    std::string detail;  // infeasible-init | restarts-exhausted | numerical-error
    Gain gain;
    double rho_reference = std::numeric_limits<double>::quiet_NaN();
    double mean_cost = std::numeric_limits<double>::quiet_NaN();
    double q25 = std::numeric_limits<double>::quiet_NaN();
    double q50 = std::numeric_limits<double>::quiet_NaN();
    double q75 = std::numeric_limits<double>::quiet_NaN();
    double instability_freq = std::numeric_limits<double>::quiet_NaN();
    double runtime_s = std::numeric_limits<double>::quiet_NaN();  // NaN = not recorded
    std::vector<double> raw_costs;
    long n_unstable = 0;
    long n_samples = 0;
    std::optional<CertifiedController> certificate;  // PR only
};

struct ExperimentRecord {
    std::string experiment;
    double grid_value = 0.0;  // sigma_sq or rollout count
    int repetition = 0;
    std::uint64_t cell_seed = 0;
    std::vector<MethodResult> methods;
};

// Runs every (grid value, repetition) cell, in parallel across cells; each
// cell derives its own rng substream from (seed, cell index), so results are
// independent of the worker count and the cell schedule.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config, int jobs = 0);

// Sorted-sample quantile with linear interpolation; p in [0, 1].
double quantile(std::vector<double> values, double p);

}  // namespace prc::bench
