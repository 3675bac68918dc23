// Times the OpenMP kernels against their serial twins: T-matrix energy
// sweep, adaptive current quadrature, quench time series.

#include <chrono>
#include <cstdio>

#include "mesolb/kernels.hpp"
#include "mesolb/quench.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mesolb;

namespace {

SystemModel friedrichs_model(double eps_s, double v) {
    ModelSpec spec;
    spec.scatterer = Eigen::MatrixXcd::Constant(1, 1, eps_s);
    spec.leads = {{1, 0.0, 1.0, {}}, {2, 0.0, 1.0, {}}};
    for (int id : {1, 2}) {
        CouplingTerm c;
        c.lead = id;
        c.strength = v;
        c.scatterer_vector = Eigen::VectorXcd::Constant(1, 1.0);
        c.lead_vector.sites = {1};
        c.lead_vector.amps = Eigen::VectorXcd::Constant(1, 1.0);
        spec.couplings.push_back(c);
    }
    return validate_model(spec);
}

template <typename F>
double time_ms(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif

    const SystemModel model = friedrichs_model(0.5, 0.7);
    const auto sub = coupling_subspace(model);
    const Tolerances tol;

    {
        std::vector<double> energies;
        for (int i = 0; i < 20000; ++i) energies.push_back(-1.99 + 3.98 * i / 19999.0);
        const double ts = time_ms(
            [&] { kernels::tmatrix_sweep(model, sub, energies, tol, Exec::serial); });
        const double tp = time_ms(
            [&] { kernels::tmatrix_sweep(model, sub, energies, tol, Exec::parallel); });
        std::printf("tmatrix_sweep   20000 energies   serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                    ts, tp, ts / tp);
    }

    {
        std::vector<ReservoirState> states{{5.0, 0.2}, {5.0, -0.2}};
        QuadratureOptions opt;
        opt.tol_quad = 1e-10;
        opt.exec = Exec::serial;
        const double ts = time_ms([&] { compute_transport(model, states, tol, opt); });
        opt.exec = Exec::parallel;
        const double tp = time_ms([&] { compute_transport(model, states, tol, opt); });
        std::printf("transport quad  tol 1e-10       serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                    ts, tp, ts / tp);
    }

    {
        std::vector<ReservoirState> states{{5.0, 0.2}, {5.0, -0.2}};
        const auto fin = build_finite(model, states, 400, 0.0);
        std::vector<double> times;
        for (int i = 0; i < 400; ++i) times.push_back(40.0 + 120.0 * i / 399.0);
        const double ts = time_ms([&] { quench_series(fin, times, Exec::serial); });
        const double tp = time_ms([&] { quench_series(fin, times, Exec::parallel); });
        std::printf("quench_series   400 samples     serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                    ts, tp, ts / tp);
    }
    return 0;
}
