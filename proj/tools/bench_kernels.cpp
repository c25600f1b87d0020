// Compares the serial reference kernels against their OpenMP variants and
// checks that both produce identical results while doing so.
#include <chrono>
#include <cstdio>
#include <string>

#include "prc/benchmarks.hpp"
#include "prc/mc_kernels.hpp"
#include "prc/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_s(F&& f) {
    const auto t0 = Clock::now();
    f();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const std::string& name, long n, double serial_s, double parallel_s, bool identical) {
    std::printf("%-18s n=%-7ld serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name.c_str(),
                n, serial_s, parallel_s, serial_s / parallel_s,
                identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const long n = argc > 1 ? std::stol(argv[1]) : 20000;
    const std::uint64_t seed = 7;

    prc::RngEngine rng(seed);
    const prc::GaussianParameterLaw law = prc::bench::synthetic_law(1e-5, rng);
    const prc::TruncatedLaw tlaw(law, 0.98);
    const auto [sys, weights] = prc::bench::dean_linear_system();
    const prc::Gain k = prc::dare_solve(sys, weights).k_ce;

    prc::mc::StabilitySweep stab_p, stab_s;
    const double stab_par = time_s([&] {
        stab_p = prc::mc::stability_sweep(tlaw, k, n, seed, prc::stream_salt::kValidation, 0);
    });
    const double stab_ser = time_s([&] {
        stab_s = prc::mc::stability_sweep_serial(tlaw, k, n, seed, prc::stream_salt::kValidation);
    });
    report("stability_sweep", n, stab_ser, stab_par, stab_p.radii == stab_s.radii);

    const std::vector<prc::LinearSystem> systems =
        prc::mc::draw_systems(law, n / 10, seed, prc::stream_salt::kEvaluation);
    const prc::VectorXd x0 = prc::VectorXd::Zero(sys.a.rows());

    prc::mc::CostSweep cost_p, cost_s;
    const double cost_par =
        time_s([&] { cost_p = prc::mc::cost_sweep(systems, k, weights, 200, x0, 0); });
    const double cost_ser =
        time_s([&] { cost_s = prc::mc::cost_sweep_serial(systems, k, weights, 200, x0); });
    report("cost_sweep", n / 10, cost_ser, cost_par, cost_p.costs == cost_s.costs);

    const bool ok = stab_p.radii == stab_s.radii && cost_p.costs == cost_s.costs;
    return ok ? 0 : 1;
}
