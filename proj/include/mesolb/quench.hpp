#pragma once

#include <memory>

#include "mesolb/transport.hpp"

namespace mesolb {

// Dense realization of the model on leads truncated to `sites_per_lead`
// sites with open (Dirichlet) far ends, diagonalized once. The initial
// one-particle density F0 is Fermi-Dirac per lead block plus
// scatterer_occupation * identity on the scatterer block.
class FiniteSystem {
public:
    FiniteSystem(const SystemModel& model, const std::vector<ReservoirState>& states,
                 int sites_per_lead, double scatterer_occupation);
    ~FiniteSystem();
    FiniteSystem(FiniteSystem&&) noexcept;
    FiniteSystem& operator=(FiniteSystem&&) noexcept;

    int sites_per_lead() const { return sites_per_lead_; }
    int dimension() const { return dim_; }
    double scatterer_occupation() const { return occupation_; }
    const std::vector<int>& lead_ids() const { return lead_ids_; }

    // Eigenvalues of H = H0 + V, ascending.
    const Eigen::VectorXd& eigenvalues() const;

    // Dense H0, V and the full eigenvector matrix (column q = eigenvector q);
    // kept for diagnostics and tests.
    Eigen::MatrixXcd h0() const;
    Eigen::MatrixXcd v() const;
    Eigen::MatrixXcd eigenvectors() const;

    // Charge and energy current out of reservoir k at time t after the quench:
    //   j_k(t)   = e * Re[ i Tr(F0 e^{iHt} [V, P_k] e^{-iHt}) ]
    //   Phi_k(t) =    Re[ -i Tr(F0 e^{iHt} [V, P_k H0 P_k] e^{-iHt}) ]
    // The raw traces are checked to be real at runtime.
    std::pair<double, double> transient_current(int lead_id, double time) const;

    // All leads at one time point, sharing one phase evaluation.
    void currents_at(double time, Eigen::VectorXd& charge, Eigen::VectorXd& energy) const;

    // e * Re[ i Tr(F0 e^{iHt} [V, P_S] e^{-iHt}) ]; together with the lead
    // currents it sums to zero exactly (charge accumulates on the scatterer).
    double scatterer_charge_rate(double time) const;

    double max_hopping() const { return max_hopping_; }
    double charge() const { return charge_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int sites_per_lead_ = 0;
    int dim_ = 0;
    double occupation_ = 0.0;
    double max_hopping_ = 0.0;
    double charge_ = 1.0;
    std::vector<int> lead_ids_;
};

FiniteSystem build_finite(const SystemModel& model, const std::vector<ReservoirState>& states,
                          int sites_per_lead, double scatterer_occupation = 0.0);

// Ballistic echo bound 0.8 * L / (2 max_j t_j): past it the wavefront
// reflected at the truncated far ends reaches the junction again.
double echo_bound(const SystemModel& model, int sites_per_lead);

struct QuenchSample {
    double time = 0.0;
    Eigen::VectorXd charge;  // per lead, leads() order
    Eigen::VectorXd energy;
};

std::vector<QuenchSample> quench_series(const FiniteSystem& fin, const std::vector<double>& times,
                                        Exec exec = Exec::parallel);

struct SteadyLead {
    int lead_id = 0;
    double mean_charge = 0.0, mean_energy = 0.0;
    double band_charge = 0.0, band_energy = 0.0;  // max - min over the window
    double lb_charge = 0.0, lb_energy = 0.0;      // Landauer-Buttiker reference
    double rel_dev_charge = 0.0, rel_dev_energy = 0.0;
};

struct SteadyComparison {
    std::vector<SteadyLead> leads;
    std::vector<QuenchSample> series;  // the sampled window
    double window_lo = 0.0, window_hi = 0.0;
    int samples = 0;
    double echo_bound = 0.0;
    bool bound_state_warning = false;
    std::vector<double> bound_states;
    QuadratureReport lb_quadrature;
};

// Averages the transient currents over `samples` uniform points in
// [window_lo, window_hi] and compares with the Landauer-Buttiker values.
// Throws when the window violates the echo bound.
SteadyComparison steady_compare(const FiniteSystem& fin, const SystemModel& model,
                                const std::vector<ReservoirState>& states, double window_lo,
                                double window_hi, int samples, const Tolerances& tol = {},
                                const QuadratureOptions& opt = {});

}  // namespace mesolb
