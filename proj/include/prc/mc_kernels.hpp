#pragma once

#include <cstdint>
#include <exception>
#include <vector>

#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "prc/distributions.hpp"
#include "prc/linear_control.hpp"

// Embarrassingly parallel Monte Carlo sweeps. Every sample i is a pure
// function of (seed, salt, i) through its own rng substream, so the OpenMP
// versions return results bitwise identical to their *_serial references for
// any worker count. The serial twins are kept for testing and benchmarking.
namespace prc::mc {

inline int resolve_jobs(int jobs) {
#ifdef _OPENMP
    return jobs > 0 ? jobs : omp_get_max_threads();
#else
    (void)jobs;
    return 1;
#endif
}

// Runs body(i) for i in [0, count) in parallel. Bodies must write to disjoint
// slots. Exceptions are captured and rethrown after the region so they never
// cross the OpenMP boundary.
template <typename Body>
void parallel_for(long count, int jobs, Body&& body) {
    std::exception_ptr error = nullptr;
    const int workers = resolve_jobs(jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(workers)
#endif
    for (long i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(prc_mc_error)
#endif
            {
                if (!error) error = std::current_exception();
            }
        }
    }
    (void)workers;
    if (error) std::rethrow_exception(error);
}

// Same contract with dynamic scheduling, for few coarse tasks of uneven
// duration (results never depend on the schedule).
template <typename Body>
void parallel_for_dynamic(long count, int jobs, Body&& body) {
    std::exception_ptr error = nullptr;
    const int workers = resolve_jobs(jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
#endif
    for (long i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(prc_mc_error)
#endif
            {
                if (!error) error = std::current_exception();
            }
        }
    }
    (void)workers;
    if (error) std::rethrow_exception(error);
}

// Splits a stacked parameter matrix S = [A B] into a system.
LinearSystem split_params(const MatrixXd& s, int d_x, int d_u);

// count draws from the unrestricted law.
std::vector<LinearSystem> draw_systems(const GaussianParameterLaw& law, long count,
                                       std::uint64_t seed, std::uint64_t salt, int jobs = 0);
std::vector<LinearSystem> draw_systems_serial(const GaussianParameterLaw& law, long count,
                                              std::uint64_t seed, std::uint64_t salt);

// count draws from the credible ellipsoid (rejection sampling per sample).
std::vector<LinearSystem> draw_systems_truncated(const TruncatedLaw& tlaw, long count,
                                                 std::uint64_t seed, std::uint64_t salt,
                                                 int jobs = 0);
std::vector<LinearSystem> draw_systems_truncated_serial(const TruncatedLaw& tlaw, long count,
                                                        std::uint64_t seed, std::uint64_t salt);

// Closed-loop spectral radii of count fresh truncated draws under a fixed
// gain; the empirical stability estimate of a validation run.
struct StabilitySweep {
    std::vector<double> radii;
    long stable_count = 0;

    long count() const { return static_cast<long>(radii.size()); }
    double phi_hat() const;
    double min_radius() const;
    double median_radius() const;
    double max_radius() const;
};

StabilitySweep stability_sweep(const TruncatedLaw& tlaw, const Gain& k, long count,
                               std::uint64_t seed, std::uint64_t salt, int jobs = 0);
StabilitySweep stability_sweep_serial(const TruncatedLaw& tlaw, const Gain& k, long count,
                                      std::uint64_t seed, std::uint64_t salt);

// Per-system closed-loop radius and finite-horizon cost under a fixed gain.
// costs[i] is +infinity when sample i is unstable; summaries skip it.
struct CostSweep {
    std::vector<double> radii;
    std::vector<double> costs;
    long stable_count = 0;

    long count() const { return static_cast<long>(radii.size()); }
    double instability_freq() const;
    std::vector<double> stable_costs() const;
};

CostSweep cost_sweep(const std::vector<LinearSystem>& systems, const Gain& k,
                     const CostWeights& weights, long horizon, const VectorXd& x0,
                     int jobs = 0);
CostSweep cost_sweep_serial(const std::vector<LinearSystem>& systems, const Gain& k,
                            const CostWeights& weights, long horizon, const VectorXd& x0);

}  // namespace prc::mc
