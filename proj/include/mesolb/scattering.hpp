#pragma once

#include <utility>
#include <vector>

#include "mesolb/leads.hpp"
#include "mesolb/model.hpp"

namespace mesolb {

// One orthonormal basis vector of the coupling subspace, tagged with the
// block of the direct sum it lives in.
struct BasisVector {
    int location = -1;  // -1 = scatterer, otherwise a lead id
    Eigen::VectorXcd scatterer_part;
    LeadVector lead_part;
};

// Finite-dimensional reduction data: the span of all rank factors of V,
// orthonormalized per location block, with V restricted to it.
struct CouplingSubspace {
    std::vector<BasisVector> basis;
    Eigen::MatrixXcd v_matrix;  // <b_a, V b_b>, Hermitian

    // Scatterer resolvent data: block = proj.adjoint() * diag(1/(lambda-E)) * proj,
    // where proj = Q^dagger * [scatterer basis columns].
    Eigen::VectorXd scatterer_eigenvalues;
    Eigen::MatrixXcd scatterer_eigenvectors;
    Eigen::MatrixXcd scatterer_proj;
    double pole_scale = 1.0;  // max(1, spectral radius of H_S)

    std::vector<int> scatterer_indices;           // basis indices in the scatterer block
    std::vector<std::vector<int>> lead_indices;   // per leads() position

    int size() const { return static_cast<int>(basis.size()); }
};

CouplingSubspace coupling_subspace(const SystemModel& model);

// Free resolvent (H0 - E - i0)^{-1} restricted to the coupling basis.
// Block-diagonal by location. Throws exceptional_energy at band edges and
// within tol_pole of a scatterer eigenvalue.
Eigen::MatrixXcd g0_matrix(const SystemModel& model, const CouplingSubspace& sub, double energy,
                           const Tolerances& tol = {});

// Transition matrix over the open channels at one energy.
struct TMatrix {
    double energy = 0.0;
    std::vector<int> channels;  // ascending open lead ids
    Eigen::MatrixXcd entries;
    double condition = 0.0;  // of the Lippmann-Schwinger system

    int channel_count() const { return static_cast<int>(channels.size()); }
};

// S(E) = 1 - 2 pi i T(E) on the same channel set.
struct SMatrix {
    double energy = 0.0;
    std::vector<int> channels;
    Eigen::MatrixXcd entries;
    double unitarity_residual = 0.0;
};

// Solves (1 + V G0(E)) w_k = V p_k on the coupling subspace and assembles
// T_jk = <p_j, w_k>. Throws channel_closed when no channel is open,
// exceptional_energy per g0_matrix, near_singular above cond_max.
TMatrix t_matrix(const SystemModel& model, const CouplingSubspace& sub, double energy,
                 const Tolerances& tol = {});
TMatrix t_matrix(const SystemModel& model, double energy, const Tolerances& tol = {});

// Throws "scattering inconsistency" when the unitarity residual exceeds
// tol.tol_scatter; that always signals an upstream bug.
SMatrix s_matrix(const TMatrix& t, const Tolerances& tol = {});

struct ScatteringResiduals {
    double optical = 0.0;    // || T - T^dag + 2 pi i T T^dag ||_max
    double normality = 0.0;  // || T T^dag - T^dag T ||_max
    double rowcol = 0.0;     // max_l | sum_m |T_lm|^2 - sum_m |T_ml|^2 |
};

ScatteringResiduals scattering_residuals(const TMatrix& t);

// Single-level scatterer coupled to two leads, no direct contact.
struct FriedrichsParams {
    double scatterer_energy = 0.0;
    LeadSpec lead1, lead2;
    double v1 = 0.0, v2 = 0.0;
    LeadVector f1, f2;
};

// Closed-form T(E) of the single-level model:
//   T_jk = v_j v_k conj(f_j(E)) f_k(E) / D(E),
//   D(E) = E - eps_S + sum_m v_m^2 <f_m, (H_m - E - i0)^{-1} f_m>.
// Independent of the linear-system path; both leads must be open at E.
Eigen::Matrix2cd friedrichs_reference_t(const FriedrichsParams& params, double energy);

// Real roots of det(1 + V G0(E)) in a window disjoint from all open bands,
// located by sign-change bracketing plus bisection to 1e-10. Scatterer
// eigenvalues whose eigenvector decouples from every coupling term are
// exact eigenvalues of H and are included. Throws when the window overlaps
// a band interior.
std::vector<double> bound_states(const SystemModel& model, std::pair<double, double> window,
                                 int grid, const Tolerances& tol = {});

// Scans every out-of-band segment of the spectral hull (padded by a bound
// on ||V||) for bound states.
std::vector<double> scan_bound_states(const SystemModel& model, int grid_per_interval = 600,
                                      const Tolerances& tol = {});

}  // namespace mesolb
