#include "prc/benchmarks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "prc/errors.hpp"

namespace prc::bench {

namespace {

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&, const VectorXd&)>& f,
                     const VectorXd& x, const VectorXd& u) {
    const double h = 1e-6;
    const Eigen::Index d_x = x.size();
    const Eigen::Index d_u = u.size();
    MatrixXd jac(d_x, d_x + d_u);
    for (Eigen::Index j = 0; j < d_x + d_u; ++j) {
        VectorXd xp = x, xm = x, up = u, um = u;
        if (j < d_x) {
            xp[j] += h;
            xm[j] -= h;
        } else {
            up[j - d_x] += h;
            um[j - d_x] -= h;
        }
        jac.col(j) = (f(xp, up) - f(xm, um)) / (2.0 * h);
    }
    return jac;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void NonlinearPlant::validate() const {
    if (d_x <= 0 || d_u <= 0) throw DomainError("NonlinearPlant: dimensions must be positive");
    if (x_star.size() != d_x || u_star.size() != d_u)
        throw DomainError("NonlinearPlant: operating point has wrong size");
    if (!f) throw DomainError("NonlinearPlant: missing step rule");
    reference.validate();
    if ((f(x_star, u_star) - x_star).cwiseAbs().maxCoeff() > 1e-12)
        throw DomainError("NonlinearPlant: operating point is not a fixed point");
    const MatrixXd jac = fd_jacobian(f, x_star, u_star);
    if ((jac.leftCols(d_x) - reference.a).cwiseAbs().maxCoeff() > 1e-6 ||
        (jac.rightCols(d_u) - reference.b).cwiseAbs().maxCoeff() > 1e-6)
        throw DomainError("NonlinearPlant: reference linearization disagrees with finite differences");
}

std::pair<LinearSystem, CostWeights> dean_linear_system() {
    MatrixXd a(3, 3);
    a << 1.01, 0.01, 0.00,
         0.01, 1.01, 0.01,
         0.00, 0.01, 1.01;
    LinearSystem sys{a, MatrixXd::Identity(3, 3)};
    CostWeights weights{1e-3 * MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3),
                        1e-3 * MatrixXd::Identity(3, 3)};
    return {sys, weights};
}

NonlinearPlant cubic_plant() {
    auto [sys, dean_weights] = dean_linear_system();
    (void)dean_weights;
    MatrixXd mix(3, 3);
    mix << 0.3, 0.0, 0.0,
           0.3, 0.3, 0.0,
           0.3, 0.3, 0.3;

    NonlinearPlant plant;
    plant.name = "cubic";
    plant.d_x = 3;
    plant.d_u = 3;
    plant.x_star = VectorXd::Zero(3);
    plant.u_star = VectorXd::Zero(3);
    const MatrixXd a = sys.a;
    plant.f = [a, mix](const VectorXd& x, const VectorXd& u) -> VectorXd {
        return a * x + (mix * x).array().cube().matrix() + u;
    };
    // The process noise level is not part of the benchmark definition; it
    // matches the linear variant so the two remain comparable.
    plant.sigma_w = 1e-3 * MatrixXd::Identity(3, 3);
    plant.reference = LinearSystem{a, MatrixXd::Identity(3, 3)};
    return plant;
}

GaussianParameterLaw synthetic_law(double sigma_sq, RngEngine& rng) {
    if (!(sigma_sq > 0.0)) throw DomainError("synthetic_law: sigma_sq must be positive");
    auto [sys, weights] = dean_linear_system();
    (void)weights;
    MatrixXd mean(3, 6);
    mean << sys.a, sys.b;
    const int d_s = 18;
    const MatrixXd scale =
        sigma_sq * (0.5 * MatrixXd::Identity(d_s, d_s) + 0.5 * MatrixXd::Ones(d_s, d_s));
    const MatrixXd covariance = sample_wishart(scale, d_s, rng);
    return GaussianParameterLaw(3, 3, mean, covariance);
}

TransitionDataset collect_rollouts(const NonlinearPlant& plant, int samples_per_rollout,
                                   int n_rollouts, double input_std, double init_std,
                                   RngEngine& rng) {
    if (samples_per_rollout <= 0 || n_rollouts <= 0)
        throw DomainError("collect_rollouts: counts must be positive");
    if (input_std < 0.0 || init_std < 0.0)
        throw DomainError("collect_rollouts: stds must be nonnegative");
    const int d_x = plant.d_x;
    const int d_u = plant.d_u;
    const VectorXd noise_std = plant.sigma_w.diagonal().cwiseSqrt();

    const long rows = static_cast<long>(samples_per_rollout) * n_rollouts;
    TransitionDataset data;
    data.inputs.resize(rows, d_x + d_u);
    data.targets.resize(rows, d_x);
    long row = 0;
    for (int r = 0; r < n_rollouts; ++r) {
        VectorXd x = plant.x_star + init_std * standard_normal_vector(d_x, rng);
        for (int k = 0; k < samples_per_rollout; ++k) {
            const VectorXd u = plant.u_star + input_std * standard_normal_vector(d_u, rng);
            data.inputs.row(row).head(d_x) = x.transpose();
            data.inputs.row(row).tail(d_u) = u.transpose();
            x = plant.f(x, u) + noise_std.cwiseProduct(standard_normal_vector(d_x, rng));
            data.targets.row(row) = x.transpose();
            ++row;
        }
    }
    data.validate();
    return data;
}

mc::CostSweep evaluate_on_law(const Gain& k, const GaussianParameterLaw& law,
                              const CostWeights& weights, long n_systems, long horizon,
                              const VectorXd& x0, std::uint64_t seed, std::uint64_t salt,
                              int jobs) {
    if (n_systems <= 0) throw DomainError("evaluate_on_law: n_systems must be positive");
    const std::vector<LinearSystem> systems = mc::draw_systems(law, n_systems, seed, salt, jobs);
    return mc::cost_sweep(systems, k, weights, horizon, x0, jobs);
}

double PlantEvaluation::diverged_freq() const {
    if (run_costs.empty()) return 0.0;
    return static_cast<double>(diverged_count) / static_cast<double>(run_costs.size());
}

std::vector<double> PlantEvaluation::finished_costs() const {
    std::vector<double> out;
    out.reserve(run_costs.size());
    for (double c : run_costs)
        if (std::isfinite(c)) out.push_back(c);
    return out;
}

PlantEvaluation evaluate_on_plant(const Gain& k, const NonlinearPlant& plant,
                                  const CostWeights& weights, long horizon, long reps,
                                  double divergence_threshold, std::uint64_t seed,
                                  std::uint64_t salt, int jobs) {
    if (horizon <= 0 || reps <= 0)
        throw DomainError("evaluate_on_plant: horizon and reps must be positive");
    if (!(divergence_threshold > 0.0))
        throw DomainError("evaluate_on_plant: divergence threshold must be positive");
    const VectorXd noise_std = plant.sigma_w.diagonal().cwiseSqrt();

    PlantEvaluation eval;
    eval.run_costs.assign(static_cast<std::size_t>(reps), 0.0);
    mc::parallel_for(reps, jobs, [&](long rep) {
        RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(rep));
        VectorXd x = plant.x_star;
        double total = 0.0;
        bool diverged = false;
        for (long t = 0; t < horizon; ++t) {
            const VectorXd x_dev = x - plant.x_star;
            const VectorXd u_dev = k.k * x_dev;
            total += x_dev.dot(weights.q * x_dev) + u_dev.dot(weights.r * u_dev);
            x = plant.f(x, plant.u_star + u_dev) +
                noise_std.cwiseProduct(standard_normal_vector(plant.d_x, rng));
            if (x.cwiseAbs().maxCoeff() >= divergence_threshold) {
                diverged = true;
                break;
            }
        }
        eval.run_costs[static_cast<std::size_t>(rep)] =
            diverged ? std::numeric_limits<double>::infinity() : total / static_cast<double>(horizon);
    });
    eval.diverged_count = static_cast<long>(
        std::count_if(eval.run_costs.begin(), eval.run_costs.end(),
                      [](double c) { return !std::isfinite(c); }));
    return eval;
}

void ExperimentConfig::validate() const {
    if (kind != "synthetic-dist" && kind != "cubic")
        throw DomainError("ExperimentConfig: unknown kind '" + kind + "'");
    if (kind == "synthetic-dist" && sigma_grid.empty())
        throw DomainError("ExperimentConfig: sigma_grid must be non-empty");
    if (kind == "cubic" && rollout_grid.empty())
        throw DomainError("ExperimentConfig: rollout_grid must be non-empty");
    for (double s : sigma_grid)
        if (!(s > 0.0)) throw DomainError("ExperimentConfig: sigma_grid entries must be positive");
    for (int n : rollout_grid)
        if (n <= 0) throw DomainError("ExperimentConfig: rollout_grid entries must be positive");
    if (repetitions <= 0) throw DomainError("ExperimentConfig: repetitions must be positive");
    profile.validate();
    if (!(r_credibility > 0.0 && r_credibility < 1.0))
        throw DomainError("ExperimentConfig: r_credibility must lie in (0,1)");
    if (n_eval_systems <= 0 || horizon <= 0 || n_true_reps <= 0 || samples_per_rollout <= 0)
        throw DomainError("ExperimentConfig: counts must be positive");
    if (input_std < 0.0 || init_std < 0.0)
        throw DomainError("ExperimentConfig: stds must be nonnegative");
    if (!(divergence_threshold > 0.0))
        throw DomainError("ExperimentConfig: divergence threshold must be positive");
    if (!(gp_signal_variance > 0.0))
        throw DomainError("ExperimentConfig: gp_signal_variance must be positive");
}

void ExperimentConfig::apply_paper_scale() {
    n_eval_systems = 10000;
    repetitions = 25;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile: p must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

namespace {

void fill_cost_summary(MethodResult& out, std::vector<double> stable_costs, long n_unstable,
                       long n_samples) {
    out.raw_costs = std::move(stable_costs);
    out.n_unstable = n_unstable;
    out.n_samples = n_samples;
    out.instability_freq = static_cast<double>(n_unstable) / static_cast<double>(n_samples);
    if (!out.raw_costs.empty()) {
        double sum = 0.0;
        for (double c : out.raw_costs) sum += c;
        out.mean_cost = sum / static_cast<double>(out.raw_costs.size());
        out.q25 = quantile(out.raw_costs, 0.25);
        out.q50 = quantile(out.raw_costs, 0.50);
        out.q75 = quantile(out.raw_costs, 0.75);
    }
}

// Synthesizes one method inside a cell, translating expected failures into
// an infeasible result instead of aborting the whole experiment.
template <typename Synth>
MethodResult synthesize_method(const std::string& name, bool record_runtime, Synth&& synth) {
    MethodResult res;
    res.method = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        synth(res);
    } catch (const NumericalError&) {
        res.feasible = false;
        res.detail = "numerical-error";
    }
    if (record_runtime) res.runtime_s = elapsed_s(start);
    return res;
}

MethodResult run_pr(const TruncatedLaw& tlaw, const RiskProfile& profile,
                    const CostWeights& weights, std::uint64_t seed,
                    const SynthesisOptions& options, bool record_runtime) {
    return synthesize_method("PR", record_runtime, [&](MethodResult& res) {
        const SynthesisResult sr = algorithm1(tlaw, profile, weights, seed, options);
        if (sr.outcome == SynthesisOutcome::Certified) {
            res.feasible = true;
            res.gain = sr.controller->k;
            res.certificate = sr.controller;
        } else {
            res.detail = to_string(sr.outcome);
        }
    });
}

MethodResult run_ce(const GaussianParameterLaw& law, const CostWeights& weights,
                    bool record_runtime) {
    return synthesize_method("CE", record_runtime, [&](MethodResult& res) {
        const LinearSystem mean_sys = mc::split_params(law.mean(), law.d_x(), law.d_u());
        res.gain = dare_solve(mean_sys, weights).k_ce;
        res.feasible = true;
    });
}

MethodResult run_r(const GaussianParameterLaw& law, const RiskProfile& profile,
                   double r_credibility, const CostWeights& weights, std::uint64_t seed,
                   const SynthesisOptions& options, bool record_runtime) {
    return synthesize_method("R", record_runtime, [&](MethodResult& res) {
        const long m =
            scenario_sample_bound(profile.eps, profile.beta, n_k_for(law.d_x(), law.d_u()));
        const ScenarioSet box = confidence_box_scenarios(
            law, r_credibility, m, substream_seed(seed, stream_salt::kBoxScenario, 0));
        const InitResult init = synth_init(box, weights, options.solver);
        if (init.feasible) {
            res.feasible = true;
            res.gain = init.k;
        } else {
            res.detail = "infeasible-init";
        }
    });
}

MethodResult run_t(const LinearSystem& reference, const CostWeights& weights,
                   bool record_runtime) {
    return synthesize_method("T", record_runtime, [&](MethodResult& res) {
        res.gain = dare_solve(reference, weights).k_ce;
        res.feasible = true;
    });
}

ExperimentRecord run_synthetic_cell(const ExperimentConfig& config, double sigma_sq,
                                    int repetition, std::uint64_t cell_seed) {
    ExperimentRecord record;
    record.experiment = config.kind;
    record.grid_value = sigma_sq;
    record.repetition = repetition;
    record.cell_seed = cell_seed;

    RngEngine law_rng = substream_engine(cell_seed, stream_salt::kLawGeneration, 0);
    const GaussianParameterLaw law = synthetic_law(sigma_sq, law_rng);
    auto [true_sys, weights] = dean_linear_system();
    const TruncatedLaw tlaw(law, config.profile.c);

    record.methods.push_back(
        run_pr(tlaw, config.profile, weights, cell_seed, config.synthesis, config.record_runtimes));
    record.methods.push_back(run_ce(law, weights, config.record_runtimes));
    record.methods.push_back(run_r(law, config.profile, config.r_credibility, weights, cell_seed,
                                   config.synthesis, config.record_runtimes));

    // One shared evaluation sample per cell keeps the method comparison paired.
    const std::vector<LinearSystem> eval_systems =
        mc::draw_systems(law, config.n_eval_systems, cell_seed, stream_salt::kEvaluation, 1);
    const VectorXd x0 = VectorXd::Zero(law.d_x());
    for (MethodResult& m : record.methods) {
        if (!m.feasible) continue;
        m.rho_reference = spectral_radius(true_sys.a + true_sys.b * m.gain.k);
        const mc::CostSweep sweep =
            mc::cost_sweep(eval_systems, m.gain, weights, config.horizon, x0, 1);
        fill_cost_summary(m, sweep.stable_costs(), sweep.count() - sweep.stable_count,
                          sweep.count());
    }
    return record;
}

ExperimentRecord run_cubic_cell(const ExperimentConfig& config, int n_rollouts, int repetition,
                                std::uint64_t cell_seed) {
    ExperimentRecord record;
    record.experiment = config.kind;
    record.grid_value = static_cast<double>(n_rollouts);
    record.repetition = repetition;
    record.cell_seed = cell_seed;

    const NonlinearPlant plant = cubic_plant();
    const int d_q = plant.d_x + plant.d_u;
    VectorXd lengthscales = config.gp_lengthscales;
    if (lengthscales.size() == 0) lengthscales = VectorXd::Constant(d_q, 2.0);
    VectorXd noise = config.gp_noise_variances;
    if (noise.size() == 0) noise = VectorXd::Constant(plant.d_x, 1e-3);
    const CostWeights weights{MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3),
                              MatrixXd(noise.asDiagonal())};

    RngEngine rollout_rng = substream_engine(cell_seed, stream_salt::kRollout, 0);
    TransitionDataset data = collect_rollouts(plant, config.samples_per_rollout, n_rollouts,
                                              config.input_std, config.init_std, rollout_rng);
    if (config.gp_regress_deltas) data.targets -= data.inputs.leftCols(plant.d_x);

    const SeKernel kernel{config.gp_signal_variance, lengthscales};
    const GpPosterior gp = GpPosterior::fit(std::move(data), kernel, noise);
    VectorXd q_star(d_q);
    q_star << plant.x_star, plant.u_star;
    GaussianParameterLaw law = gp.linearize(q_star);
    if (config.gp_regress_deltas) law = delta_adjusted(law);
    const TruncatedLaw tlaw(law, config.profile.c);

    record.methods.push_back(
        run_pr(tlaw, config.profile, weights, cell_seed, config.synthesis, config.record_runtimes));
    record.methods.push_back(run_ce(law, weights, config.record_runtimes));
    record.methods.push_back(run_r(law, config.profile, config.r_credibility, weights, cell_seed,
                                   config.synthesis, config.record_runtimes));
    record.methods.push_back(run_t(plant.reference, weights, config.record_runtimes));

    for (MethodResult& m : record.methods) {
        if (!m.feasible) continue;
        m.rho_reference = spectral_radius(plant.reference.a + plant.reference.b * m.gain.k);
        const PlantEvaluation eval =
            evaluate_on_plant(m.gain, plant, weights, config.horizon, config.n_true_reps,
                              config.divergence_threshold, cell_seed, stream_salt::kEvaluation, 1);
        fill_cost_summary(m, eval.finished_costs(), eval.diverged_count, eval.reps());
    }
    return record;
}

}  // namespace

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    const bool synthetic = config.kind == "synthetic-dist";
    const long grid_size =
        synthetic ? static_cast<long>(config.sigma_grid.size())
                  : static_cast<long>(config.rollout_grid.size());
    const long cells = grid_size * config.repetitions;

    std::vector<ExperimentRecord> records(static_cast<std::size_t>(cells));
    mc::parallel_for_dynamic(cells, jobs, [&](long ci) {
        const long grid_idx = ci / config.repetitions;
        const int repetition = static_cast<int>(ci % config.repetitions);
        const std::uint64_t cell_seed =
            substream_seed(config.seed, stream_salt::kExperimentCell, static_cast<std::uint64_t>(ci));
        records[static_cast<std::size_t>(ci)] =
            synthetic
                ? run_synthetic_cell(config, config.sigma_grid[static_cast<std::size_t>(grid_idx)],
                                     repetition, cell_seed)
                : run_cubic_cell(config, config.rollout_grid[static_cast<std::size_t>(grid_idx)],
                                 repetition, cell_seed);
    });
    return records;
}

}  // namespace prc::bench
