#include "prc/synthesis.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "prc/errors.hpp"
#include "prc/mc_kernels.hpp"

namespace prc {

namespace {

MatrixXd pd_inverse(const MatrixXd& m, const char* what) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw DomainError(std::string(what) + ": matrix is not PD");
    return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

bool all_scenarios_stable(const ScenarioSet& scenarios, const Gain& k) {
    for (const auto& sys : scenarios.systems)
        if (!is_stable(sys, k)) return false;
    return true;
}

}  // namespace

void ScenarioSet::validate() const {
    if (systems.empty()) throw DomainError("ScenarioSet: at least one scenario required");
    if (d_x <= 0 || d_u <= 0) throw DomainError("ScenarioSet: dimensions must be positive");
    for (const auto& sys : systems) {
        sys.validate();
        if (sys.d_x() != d_x || sys.d_u() != d_u)
            throw DomainError("ScenarioSet: inconsistent member dimensions");
    }
}

ScenarioSet draw_scenarios(const TruncatedLaw& tlaw, long m, std::uint64_t seed, int jobs) {
    if (m < 1) throw DomainError("draw_scenarios: m must be >= 1");
    ScenarioSet set;
    set.systems = mc::draw_systems_truncated(tlaw, m, seed, stream_salt::kScenario, jobs);
    set.d_x = tlaw.base().d_x();
    set.d_u = tlaw.base().d_u();
    set.law_hash = tlaw.base().content_hash();
    set.seed = seed;
    set.source = "truncated-law";
    return set;
}

ScenarioSet confidence_box_scenarios(const GaussianParameterLaw& law, double credibility, long m,
                                     std::uint64_t seed) {
    if (m < 1) throw DomainError("confidence_box_scenarios: m must be >= 1");
    if (!(credibility > 0.0 && credibility < 1.0))
        throw DomainError("confidence_box_scenarios: credibility must lie in (0,1)");
    // Two-sided per-entry quantile: a chi-squared(1) mass of `credibility`
    // below z^2 is the central normal interval of the same mass.
    const double z = std::sqrt(chi2_quantile(1, credibility));
    const VectorXd std_vec = law.covariance().diagonal().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd half_widths = z * unvec(std_vec, law.d_x(), law.d_q());

    ScenarioSet set;
    set.systems.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
        RngEngine rng = substream_engine(seed, stream_salt::kBoxScenario, static_cast<std::uint64_t>(i));
        std::bernoulli_distribution coin(0.5);
        MatrixXd s = law.mean();
        for (Eigen::Index c = 0; c < s.cols(); ++c)
            for (Eigen::Index r = 0; r < s.rows(); ++r)
                s(r, c) += (coin(rng) ? 1.0 : -1.0) * half_widths(r, c);
        set.systems.push_back(mc::split_params(s, law.d_x(), law.d_u()));
    }
    set.d_x = law.d_x();
    set.d_u = law.d_u();
    set.law_hash = law.content_hash();
    set.seed = seed;
    set.source = "confidence-box";
    return set;
}

InitResult synth_init(const ScenarioSet& scenarios, const CostWeights& weights,
                      const sdp::Settings& solver) {
    scenarios.validate();
    weights.validate(scenarios.d_x, scenarios.d_u);
    const int d_x = scenarios.d_x;
    const int d_u = scenarios.d_u;

    const MatrixXd q_sqrt = symmetric_sqrt_psd(weights.q);
    const MatrixXd r_inv = pd_inverse(weights.r, "synth_init: R");
    const MatrixXd sw_sqrt = weights.sigma_w.diagonal().cwiseSqrt().asDiagonal();
    double delta = 1e-6 * weights.sigma_w.trace() / d_x;
    if (delta <= 0.0) delta = 1e-9;  // keep Y invertible under zero noise

    sdp::Problem problem;
    const int vy = problem.add_symmetric(d_x, "Y");
    const int vl = problem.add_rectangular(d_u, d_x, "L");
    const int vz = problem.add_symmetric(d_x, "Z");

    for (const auto& sys : scenarios.systems) {
        sdp::Lmi& lmi = problem.add_lmi(3 * d_x + d_u);
        lmi.var_block(0, 0, vy);
        lmi.term(d_x, 0, vy, sys.a, std::nullopt);
        lmi.term(d_x, 0, vl, sys.b, std::nullopt);
        lmi.var_block(d_x, d_x, vy);
        lmi.term(2 * d_x, 0, vy, q_sqrt, std::nullopt);
        lmi.constant(2 * d_x, 2 * d_x, MatrixXd::Identity(d_x, d_x));
        lmi.var_block(3 * d_x, 0, vl);
        lmi.constant(3 * d_x, 3 * d_x, r_inv);
    }

    sdp::Lmi& noise = problem.add_lmi(2 * d_x);
    noise.var_block(0, 0, vz);
    noise.constant(d_x, 0, sw_sqrt);
    noise.var_block(d_x, d_x, vy);

    sdp::Lmi& floor = problem.add_lmi(d_x);
    floor.var_block(0, 0, vy);
    floor.constant(0, 0, -delta * MatrixXd::Identity(d_x, d_x));

    problem.set_objective_min({{vz, MatrixXd::Identity(d_x, d_x)}});

    const sdp::Solution sol = problem.solve(solver);
    if (sol.status == sdp::Status::Infeasible) return InitResult{};
    if (sol.status != sdp::Status::Optimal)
        throw NumericalError(std::string("synth_init: solver failed (") + sdp::to_string(sol.status) + ")");

    InitResult res;
    res.y = symmetrized(sol.values.at(vy));
    Eigen::LLT<MatrixXd> ylt(res.y);
    if (ylt.info() != Eigen::Success)
        throw NumericalError("synth_init: returned Y is not PD");
    res.k = Gain{ylt.solve(sol.values.at(vl).transpose()).transpose()};
    res.ub = sol.objective;
    if (!all_scenarios_stable(scenarios, res.k))
        throw NumericalError("synth_init: gain failed the scenario stability re-check");
    res.feasible = true;
    return res;
}

MatrixXd linearized_inverse_apply(const MatrixXd& x_bar, const MatrixXd& x) {
    require_symmetric(x_bar, "linearized_inverse: x_bar");
    const MatrixXd inv = pd_inverse(x_bar, "linearized_inverse");
    return symmetrized(2.0 * inv - inv * x * inv);
}

ImproveResult synth_improve_step(const ScenarioSet& scenarios, const CostWeights& weights,
                                 const std::vector<MatrixXd>& x_bars,
                                 const sdp::Settings& solver) {
    scenarios.validate();
    weights.validate(scenarios.d_x, scenarios.d_u);
    const long m = scenarios.size();
    if (static_cast<long>(x_bars.size()) != m)
        throw DomainError("synth_improve_step: one expansion point per scenario required");
    const int d_x = scenarios.d_x;
    const int d_u = scenarios.d_u;
    const MatrixXd r_inv = pd_inverse(weights.r, "synth_improve_step: R");

    sdp::Problem problem;
    const int vk = problem.add_rectangular(d_u, d_x, "K");
    std::vector<int> vxs;
    vxs.reserve(static_cast<std::size_t>(m));
    std::vector<sdp::TraceTerm> objective;
    objective.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
        const int vx = problem.add_symmetric(d_x, "X" + std::to_string(i));
        vxs.push_back(vx);
        objective.push_back({vx, weights.sigma_w / static_cast<double>(m)});
    }

    for (long i = 0; i < m; ++i) {
        const auto& sys = scenarios.systems[static_cast<std::size_t>(i)];
        const MatrixXd xb_inv = pd_inverse(x_bars[static_cast<std::size_t>(i)],
                                           "synth_improve_step: x_bar");
        sdp::Lmi& lmi = problem.add_lmi(2 * d_x + d_u);
        lmi.var_block(0, 0, vxs[static_cast<std::size_t>(i)]);
        lmi.constant(0, 0, -weights.q);
        lmi.constant(d_x, 0, sys.a);
        lmi.term(d_x, 0, vk, sys.b, std::nullopt);
        lmi.constant(d_x, d_x, 2.0 * xb_inv);
        lmi.term(d_x, d_x, vxs[static_cast<std::size_t>(i)], xb_inv, xb_inv, -1.0);
        lmi.var_block(2 * d_x, 0, vk);
        lmi.constant(2 * d_x, 2 * d_x, r_inv);
    }

    problem.set_objective_min(std::move(objective));

    const sdp::Solution sol = problem.solve(solver);
    // Anything short of a verified optimum counts as a breakdown; the MM
    // fallback keeps the previous verified gain, so no shaky iterate leaks.
    if (sol.status != sdp::Status::Optimal) return ImproveResult{};

    ImproveResult res;
    res.k = Gain{sol.values.at(vk)};
    res.xs.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i)
        res.xs.push_back(symmetrized(sol.values.at(vxs[static_cast<std::size_t>(i)])));
    res.objective = sol.objective;
    res.feasible = true;
    return res;
}

IterateResult synth_iterate(const ScenarioSet& scenarios, const CostWeights& weights,
                            const InitResult& init, const StopRule& stop,
                            const sdp::Settings& solver) {
    if (!init.feasible) throw DomainError("synth_iterate: initialization was infeasible");
    if (stop.max_iter < 0) throw DomainError("synth_iterate: max_iter must be >= 0");

    IterateResult out;
    out.k = init.k;
    out.trace.push_back(init.ub);

    const MatrixXd y_inv = pd_inverse(init.y, "synth_iterate: Y");
    std::vector<MatrixXd> x_bars(static_cast<std::size_t>(scenarios.size()), y_inv);

    for (int iter = 0; iter < stop.max_iter; ++iter) {
        ImproveResult step = synth_improve_step(scenarios, weights, x_bars, solver);
        if (!step.feasible) {
            out.mm_breakdown = true;
            return out;
        }
        bool verified = all_scenarios_stable(scenarios, step.k) &&
                        step.objective <= out.trace.back() * (1.0 + 1e-6);
        for (const auto& x : step.xs)
            if (min_eigenvalue(x) <= 0.0) verified = false;
        if (!verified) {
            out.mm_breakdown = true;
            return out;
        }
        const double prev = out.trace.back();
        out.trace.push_back(step.objective);
        out.k = step.k;
        x_bars = std::move(step.xs);
        if (prev - step.objective <= stop.rel_tol * std::max(std::abs(prev), 1e-12)) break;
    }
    return out;
}

ValidationReport validate(const Gain& k, const TruncatedLaw& tlaw, const RiskProfile& profile,
                          std::uint64_t seed, int jobs) {
    profile.validate();
    const long m_val = hoeffding_sample_bound(profile.eps_val, profile.alpha);
    const mc::StabilitySweep sweep =
        mc::stability_sweep(tlaw, k, m_val, seed, stream_salt::kValidation, jobs);

    ValidationReport report;
    report.empirical_stability = sweep.phi_hat();
    report.m_validation = m_val;
    report.pass = report.empirical_stability >= 1.0 - profile.eps;
    report.rho_min = sweep.min_radius();
    report.rho_median = sweep.median_radius();
    report.rho_max = sweep.max_radius();
    report.seed = seed;
    return report;
}

const char* to_string(SynthesisOutcome o) {
    switch (o) {
        case SynthesisOutcome::Certified: return "certified";
        case SynthesisOutcome::InfeasibleInit: return "infeasible-init";
        case SynthesisOutcome::RestartsExhausted: return "restarts-exhausted";
    }
    return "unknown";
}

SynthesisResult algorithm1(const TruncatedLaw& tlaw, const RiskProfile& profile,
                           const CostWeights& weights, std::uint64_t seed,
                           const SynthesisOptions& options) {
    profile.validate();
    if (options.max_restarts < 1) throw DomainError("algorithm1: max_restarts must be >= 1");
    const int d_x = tlaw.base().d_x();
    const int d_u = tlaw.base().d_u();
    weights.validate(d_x, d_u);
    const long m = scenario_sample_bound(profile.eps, profile.beta, n_k_for(d_x, d_u));

    SynthesisResult result{SynthesisOutcome::RestartsExhausted, std::nullopt, std::nullopt, 0};
    for (int attempt = 0; attempt < options.max_restarts; ++attempt) {
        result.attempts = attempt + 1;
        const std::uint64_t scen_seed =
            substream_seed(seed, stream_salt::kScenario, static_cast<std::uint64_t>(attempt));
        const ScenarioSet scenarios = draw_scenarios(tlaw, m, scen_seed, options.jobs);

        const InitResult init = synth_init(scenarios, weights, options.solver);
        if (!init.feasible) {
            result.outcome = SynthesisOutcome::InfeasibleInit;
            return result;
        }
        const IterateResult it = synth_iterate(scenarios, weights, init, options.stop, options.solver);

        const std::uint64_t val_seed =
            substream_seed(seed, stream_salt::kValidation, static_cast<std::uint64_t>(attempt));
        const ValidationReport report = validate(it.k, tlaw, profile, val_seed, options.jobs);
        result.last_validation = report;
        if (!report.pass) continue;

        CertifiedController ctrl;
        ctrl.k = it.k;
        ctrl.profile = profile;
        ctrl.m_scenarios = m;
        ctrl.m_validation = report.m_validation;
        ctrl.empirical_stability = report.empirical_stability;
        ctrl.guaranteed_stability_prob = profile.c - profile.eps - profile.eps_val;
        ctrl.confidence = 1.0 - profile.alpha;
        ctrl.objective_trace = it.trace;
        ctrl.seeds = SeedProvenance{seed, scen_seed, val_seed};
        ctrl.attempts = attempt + 1;
        result.outcome = SynthesisOutcome::Certified;
        result.controller = std::move(ctrl);
        return result;
    }
    return result;
}

}  // namespace prc
