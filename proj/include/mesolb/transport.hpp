#pragma once

#include <functional>

#include "mesolb/scattering.hpp"

namespace mesolb {

enum class Exec { serial, parallel };

// Occupation 1/(1 + exp(beta (E - mu))), computed overflow-safely.
double fermi_dirac(const ReservoirState& state, double energy);

struct QuadratureOptions {
    double tol_quad = 1e-8;  // absolute target per integral component
    int gauss_order = 32;
    int max_depth = 30;
    int min_open_channels = 1;  // intervals with fewer open channels are skipped
    Exec exec = Exec::parallel;
};

struct QuadratureReport {
    long node_count = 0;
    double estimated_error = 0.0;
    std::vector<double> excluded_energies;
    WarningLog warnings;
};

// Component values at one energy; return false to exclude the node (the
// engine then records a warning and counts the node as skipped).
using SpectralIntegrand =
    std::function<bool(double energy, Eigen::Ref<Eigen::VectorXd> out, Warning* warn)>;

// Band-aware adaptive quadrature: partitions the energy axis into maximal
// intervals of constant open-channel set, applies the theta-substitution
// E = eps + 2 t cos(theta) when all open leads share one band (plain
// Gauss-Legendre otherwise) and bisects until the estimated error of every
// panel fits its share of tol_quad. Throws quadrature_error when a panel
// fails to converge within max_depth splits.
Eigen::VectorXd integrate_spectral_vec(const SystemModel& model, int dim,
                                       const SpectralIntegrand& integrand,
                                       const QuadratureOptions& opt,
                                       QuadratureReport* report = nullptr);

// Scalar convenience wrapper; exceptional/near-singular evaluations are
// retried at a shifted node and skipped with a warning if still failing.
double integrate_spectral(const SystemModel& model, const std::function<double(double)>& integrand,
                          const QuadratureOptions& opt, QuadratureReport* report = nullptr);

struct EntropyBreakdown {
    double from_currents = 0.0;  // -sum_k beta_k (Phi_k - mu_k I_k)
    double direct = 0.0;         // single quadrature of the spectral form
    double symmetrized = 0.0;    // symmetrized integrand (time-reversal symmetric form)
    double max_deviation = 0.0;  // max pairwise |difference|
};

struct TransportResult {
    std::vector<int> lead_ids;
    Eigen::VectorXd charge_current;    // j_k, charge/time
    Eigen::VectorXd energy_current;    // Phi_k, energy/time
    Eigen::VectorXd particle_current;  // -j_k / e
    double sum_charge = 0.0;           // conservation residual sum_k j_k
    double sum_energy = 0.0;
    EntropyBreakdown entropy;
    Eigen::MatrixXd channel_weight;  // (k,j) -> integral of |T_kj|^2 dE
    QuadratureReport quadrature;
};

// One shared quadrature pass producing currents, entropy (all three routes)
// and the integrated channel weights. `states` pairs with model.leads() by
// position.
TransportResult compute_transport(const SystemModel& model,
                                  const std::vector<ReservoirState>& states,
                                  const Tolerances& tol = {}, const QuadratureOptions& opt = {});

Eigen::VectorXd charge_currents(const SystemModel& model, const std::vector<ReservoirState>& states,
                                double tol_quad);
Eigen::VectorXd energy_currents(const SystemModel& model, const std::vector<ReservoirState>& states,
                                double tol_quad);
EntropyBreakdown entropy_production(const SystemModel& model,
                                    const std::vector<ReservoirState>& states, double tol_quad);

struct PositivityVerdict {
    std::vector<std::pair<int, int>> nontrivial_channels;  // directed (k,j), k != j
    std::vector<std::pair<int, int>> biased_pairs;         // (beta,mu) differ
    bool predicted_strict_positive = false;
    double sigma = 0.0;  // direct-quadrature route
    bool satisfied = true;
};

PositivityVerdict positivity_verdict(const SystemModel& model,
                                     const std::vector<ReservoirState>& states,
                                     const Tolerances& tol = {}, const QuadratureOptions& opt = {});
PositivityVerdict positivity_verdict(const TransportResult& result, const SystemModel& model,
                                     const std::vector<ReservoirState>& states,
                                     const Tolerances& tol = {});

}  // namespace mesolb
