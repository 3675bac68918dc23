#include "mesolb/kernels.hpp"

#include <cmath>

#include "mesolb/textio.hpp"

namespace mesolb::kernels {

namespace {

SweepRow solve_one(const SystemModel& model, const CouplingSubspace& sub, double energy,
                   const Tolerances& tol) {
    SweepRow row;
    row.energy = energy;
    // Two-stage retry: first just past the tol_pole exclusion zone, then far
    // enough that the solve's optical residual is safe for the S matrix.
    const double small = std::max(2.05 * tol.tol_pole * sub.pole_scale, 1e-11);
    const double big = std::max(1e-4 * sub.pole_scale, 10.0 * small);
    const double shifts[5] = {0.0, small, -small, big, -big};
    for (double s : shifts) {
        try {
            row.t = t_matrix(model, sub, energy + s, tol);
            if (s != 0.0)
                row.warning = Warning{"node_shifted",
                                      {{"energy", format_double(energy)},
                                       {"shift", format_double(s)}}};
            return row;
        } catch (const channel_closed&) {
            row.warning = Warning{"no_open_channels", {{"energy", format_double(energy)}}};
            return row;
        } catch (const exceptional_energy&) {
            row.warning = Warning{"exceptional_energy", {{"energy", format_double(energy)}}};
        } catch (const near_singular& e) {
            row.warning = Warning{"near_singular",
                                  {{"energy", format_double(energy)},
                                   {"cond", format_double(e.condition)}}};
        }
    }
    return row;
}

}  // namespace

std::vector<SweepRow> tmatrix_sweep(const SystemModel& model, const CouplingSubspace& sub,
                                    const std::vector<double>& energies, const Tolerances& tol,
                                    Exec exec) {
    std::vector<SweepRow> rows(energies.size());
    const int n = static_cast<int>(energies.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
    for (int i = 0; i < n; ++i)
        rows[static_cast<std::size_t>(i)] =
            solve_one(model, sub, energies[static_cast<std::size_t>(i)], tol);
    return rows;
}

}  // namespace mesolb::kernels
