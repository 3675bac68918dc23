#pragma once

#include <optional>

#include "mesolb/transport.hpp"

namespace mesolb::kernels {

// One energy of a T-matrix sweep. `t` is empty where no channel is open or
// the solve had to be skipped; `warning` says why.
struct SweepRow {
    double energy = 0.0;
    std::optional<TMatrix> t;
    std::optional<Warning> warning;
};

// Embarrassingly parallel sweep over energies; near-singular and exceptional
// nodes are retried at a shifted energy once, then skipped with a warning.
// Serial and parallel execution produce bit-identical rows.
std::vector<SweepRow> tmatrix_sweep(const SystemModel& model, const CouplingSubspace& sub,
                                    const std::vector<double>& energies, const Tolerances& tol,
                                    Exec exec = Exec::parallel);

}  // namespace mesolb::kernels
