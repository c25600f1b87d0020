#include "prc/mc_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prc/errors.hpp"
#include "prc/rng.hpp"

namespace prc::mc {

namespace {

double closed_loop_radius(const LinearSystem& sys, const Gain& k) {
    return spectral_radius(sys.a + sys.b * k.k);
}

}  // namespace

LinearSystem split_params(const MatrixXd& s, int d_x, int d_u) {
    if (s.rows() != d_x || s.cols() != d_x + d_u)
        throw DomainError("split_params: parameter matrix has wrong shape");
    return LinearSystem{s.leftCols(d_x), s.rightCols(d_u)};
}

std::vector<LinearSystem> draw_systems(const GaussianParameterLaw& law, long count,
                                       std::uint64_t seed, std::uint64_t salt, int jobs) {
    if (count < 0) throw DomainError("draw_systems: negative count");
    std::vector<LinearSystem> out(static_cast<std::size_t>(count));
    parallel_for(count, jobs, [&](long i) {
        RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] = split_params(law.sample(rng), law.d_x(), law.d_u());
    });
    return out;
}

std::vector<LinearSystem> draw_systems_serial(const GaussianParameterLaw& law, long count,
                                              std::uint64_t seed, std::uint64_t salt) {
    if (count < 0) throw DomainError("draw_systems: negative count");
    std::vector<LinearSystem> out(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] = split_params(law.sample(rng), law.d_x(), law.d_u());
    }
    return out;
}

std::vector<LinearSystem> draw_systems_truncated(const TruncatedLaw& tlaw, long count,
                                                 std::uint64_t seed, std::uint64_t salt,
                                                 int jobs) {
    if (count < 0) throw DomainError("draw_systems_truncated: negative count");
    const auto& base = tlaw.base();
    std::vector<LinearSystem> out(static_cast<std::size_t>(count));
    parallel_for(count, jobs, [&](long i) {
        RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] =
            split_params(sample_truncated(tlaw, rng), base.d_x(), base.d_u());
    });
    return out;
}

std::vector<LinearSystem> draw_systems_truncated_serial(const TruncatedLaw& tlaw, long count,
                                                        std::uint64_t seed, std::uint64_t salt) {
    if (count < 0) throw DomainError("draw_systems_truncated: negative count");
    const auto& base = tlaw.base();
    std::vector<LinearSystem> out(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] =
            split_params(sample_truncated(tlaw, rng), base.d_x(), base.d_u());
    }
    return out;
}

double StabilitySweep::phi_hat() const {
    if (radii.empty()) return 0.0;
    return static_cast<double>(stable_count) / static_cast<double>(radii.size());
}

double StabilitySweep::min_radius() const {
    if (radii.empty()) throw DomainError("StabilitySweep: empty sweep");
    return *std::min_element(radii.begin(), radii.end());
}

double StabilitySweep::median_radius() const {
    if (radii.empty()) throw DomainError("StabilitySweep: empty sweep");
    std::vector<double> sorted = radii;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double StabilitySweep::max_radius() const {
    if (radii.empty()) throw DomainError("StabilitySweep: empty sweep");
    return *std::max_element(radii.begin(), radii.end());
}

namespace {

template <typename DrawRadius>
StabilitySweep run_stability_sweep(long count, int jobs, DrawRadius&& draw_radius, bool parallel) {
    if (count < 0) throw DomainError("stability_sweep: negative count");
    StabilitySweep sweep;
    sweep.radii.assign(static_cast<std::size_t>(count), 0.0);
    if (parallel) {
        parallel_for(count, jobs, [&](long i) { sweep.radii[static_cast<std::size_t>(i)] = draw_radius(i); });
    } else {
        for (long i = 0; i < count; ++i) sweep.radii[static_cast<std::size_t>(i)] = draw_radius(i);
    }
    sweep.stable_count =
        std::count_if(sweep.radii.begin(), sweep.radii.end(), [](double r) { return r < 1.0; });
    return sweep;
}

}  // namespace

StabilitySweep stability_sweep(const TruncatedLaw& tlaw, const Gain& k, long count,
                               std::uint64_t seed, std::uint64_t salt, int jobs) {
    const auto& base = tlaw.base();
    return run_stability_sweep(
        count, jobs,
        [&](long i) {
            RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
            LinearSystem sys = split_params(sample_truncated(tlaw, rng), base.d_x(), base.d_u());
            return closed_loop_radius(sys, k);
        },
        true);
}

StabilitySweep stability_sweep_serial(const TruncatedLaw& tlaw, const Gain& k, long count,
                                      std::uint64_t seed, std::uint64_t salt) {
    const auto& base = tlaw.base();
    return run_stability_sweep(
        count, 1,
        [&](long i) {
            RngEngine rng = substream_engine(seed, salt, static_cast<std::uint64_t>(i));
            LinearSystem sys = split_params(sample_truncated(tlaw, rng), base.d_x(), base.d_u());
            return closed_loop_radius(sys, k);
        },
        false);
}

double CostSweep::instability_freq() const {
    if (radii.empty()) return 0.0;
    return static_cast<double>(count() - stable_count) / static_cast<double>(count());
}

std::vector<double> CostSweep::stable_costs() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(stable_count));
    for (std::size_t i = 0; i < costs.size(); ++i)
        if (radii[i] < 1.0) out.push_back(costs[i]);
    return out;
}

namespace {

CostSweep run_cost_sweep(const std::vector<LinearSystem>& systems, const Gain& k,
                         const CostWeights& weights, long horizon, const VectorXd& x0, int jobs,
                         bool parallel) {
    if (horizon <= 0) throw DomainError("cost_sweep: horizon must be positive");
    const long count = static_cast<long>(systems.size());
    CostSweep sweep;
    sweep.radii.assign(static_cast<std::size_t>(count), 0.0);
    sweep.costs.assign(static_cast<std::size_t>(count), std::numeric_limits<double>::infinity());
    auto body = [&](long i) {
        const auto idx = static_cast<std::size_t>(i);
        const LinearSystem& sys = systems[idx];
        const double rho = closed_loop_radius(sys, k);
        sweep.radii[idx] = rho;
        if (rho < 1.0)
            sweep.costs[idx] = finite_horizon_expected_cost(sys, k, weights, x0, horizon);
    };
    if (parallel) {
        parallel_for(count, jobs, body);
    } else {
        for (long i = 0; i < count; ++i) body(i);
    }
    sweep.stable_count =
        std::count_if(sweep.radii.begin(), sweep.radii.end(), [](double r) { return r < 1.0; });
    return sweep;
}

}  // namespace

CostSweep cost_sweep(const std::vector<LinearSystem>& systems, const Gain& k,
                     const CostWeights& weights, long horizon, const VectorXd& x0, int jobs) {
    return run_cost_sweep(systems, k, weights, horizon, x0, jobs, true);
}

CostSweep cost_sweep_serial(const std::vector<LinearSystem>& systems, const Gain& k,
                            const CostWeights& weights, long horizon, const VectorXd& x0) {
    return run_cost_sweep(systems, k, weights, horizon, x0, 1, false);
}

}  // namespace prc::mc
