// Shared model factories and independent brute-force oracles for the tests.
// The oracles deliberately avoid the library's closed-form code paths.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <random>

#include "mesolb/model.hpp"

namespace testutil {

using mesolb::cdouble;

inline mesolb::LeadVector site_vector(std::vector<int> sites, std::vector<cdouble> amps) {
    mesolb::LeadVector v;
    v.sites = std::move(sites);
    v.amps.resize(static_cast<Eigen::Index>(amps.size()));
    for (std::size_t i = 0; i < amps.size(); ++i) v.amps[static_cast<Eigen::Index>(i)] = amps[i];
    return v;
}

inline mesolb::LeadVector delta_site(int site) { return site_vector({site}, {1.0}); }

struct FriedrichsSetup {
    double scatterer_energy = 0.0;
    double v1 = 0.7, v2 = 0.7;
    double onsite1 = 0.0, hopping1 = 1.0;
    double onsite2 = 0.0, hopping2 = 1.0;
};

inline mesolb::ModelSpec friedrichs_spec(const FriedrichsSetup& s = {}) {
    mesolb::ModelSpec spec;
    spec.scatterer = Eigen::MatrixXcd::Constant(1, 1, s.scatterer_energy);
    spec.leads = {{1, s.onsite1, s.hopping1, {}}, {2, s.onsite2, s.hopping2, {}}};
    mesolb::CouplingTerm c1;
    c1.lead = 1;
    c1.strength = s.v1;
    c1.scatterer_vector = Eigen::VectorXcd::Constant(1, 1.0);
    c1.lead_vector = delta_site(1);
    mesolb::CouplingTerm c2 = c1;
    c2.lead = 2;
    c2.strength = s.v2;
    spec.couplings = {c1, c2};
    return spec;
}

inline mesolb::SystemModel friedrichs_model(const FriedrichsSetup& s = {}) {
    return mesolb::validate_model(friedrichs_spec(s));
}

// Three identical leads on a single-level dot plus a ring of direct
// contacts; one contact carries a complex phase, threading a flux through
// the loop and breaking time reversal. Contact vectors attach at site 1 of
// lead j and site 2 of lead k, so each lead's contact family stays
// orthonormal.
inline mesolb::SystemModel three_lead_flux_model(double phase = 2.0943951023931953 /* 2 pi / 3 */) {
    mesolb::ModelSpec spec;
    spec.scatterer = Eigen::MatrixXcd::Constant(1, 1, 0.2);
    spec.leads = {{1, 0.0, 1.0, {}}, {2, 0.0, 1.0, {}}, {3, 0.0, 1.0, {}}};
    for (int id : {1, 2, 3}) {
        mesolb::CouplingTerm c;
        c.lead = id;
        c.strength = 0.5;
        c.scatterer_vector = Eigen::VectorXcd::Constant(1, 1.0);
        c.lead_vector = delta_site(1);
        spec.couplings.push_back(c);
    }
    auto contact = [&](int j, int k, cdouble amp_j) {
        mesolb::DirectContactTerm t;
        t.lead_j = j;
        t.lead_k = k;
        t.strength = 0.35;
        t.vector_j = site_vector({1}, {amp_j});
        t.vector_k = site_vector({2}, {1.0});
        return t;
    };
    spec.contacts = {contact(1, 2, std::polar(1.0, phase)), contact(2, 3, 1.0),
                     contact(3, 1, 1.0)};
    return mesolb::validate_model(spec);
}

// ---------------------------------------------------------------------------
// Random valid-model ensemble (fixed seeds in the tests keep it reproducible).

inline Eigen::VectorXcd random_unit(std::mt19937_64& rng, int dim, bool complex_amps) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = cdouble(gauss(rng), complex_amps ? gauss(rng) : 0.0);
    return v / v.norm();
}

// Orthonormal family of `count` vectors in C^dim.
inline std::vector<Eigen::VectorXcd> random_frame(std::mt19937_64& rng, int dim, int count,
                                                  bool complex_amps) {
    std::vector<Eigen::VectorXcd> frame;
    while (static_cast<int>(frame.size()) < count) {
        Eigen::VectorXcd v = random_unit(rng, dim, complex_amps);
        for (const auto& b : frame) v -= b.dot(v) * b;
        if (v.norm() < 0.3) continue;
        frame.push_back(v / v.norm());
    }
    return frame;
}

inline mesolb::LeadVector lead_vector_from_dense(const Eigen::VectorXcd& dense) {
    mesolb::LeadVector v;
    v.sites.resize(static_cast<std::size_t>(dense.size()));
    for (Eigen::Index i = 0; i < dense.size(); ++i) v.sites[static_cast<std::size_t>(i)] = 1 + static_cast<int>(i);
    v.amps = dense;
    return v;
}

inline mesolb::ModelSpec random_spec(std::mt19937_64& rng, int n_leads) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    mesolb::ModelSpec spec;

    const int m = 1 + static_cast<int>(unif(rng) * 3.999);
    Eigen::MatrixXcd a(m, m);
    const bool complex_model = unif(rng) < 0.5;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) a(r, c) = cdouble(gauss(rng), complex_model ? gauss(rng) : 0.0);
    spec.scatterer = 0.5 * (a + a.adjoint());

    const bool same_band = unif(rng) < 0.5;
    for (int i = 0; i < n_leads; ++i) {
        mesolb::LeadSpec lead;
        lead.id = i + 1;
        lead.onsite = same_band ? 0.0 : 0.8 * (unif(rng) - 0.5);
        lead.hopping = same_band ? 1.0 : 0.7 + 0.6 * unif(rng);
        spec.leads.push_back(lead);
    }

    for (int i = 0; i < n_leads; ++i) {
        const int terms = std::min(m, 1 + (unif(rng) < 0.3 ? 1 : 0));
        const auto s_frame = random_frame(rng, m, terms, complex_model);
        const auto f_frame = random_frame(rng, 4, terms, complex_model);
        for (int l = 0; l < terms; ++l) {
            mesolb::CouplingTerm c;
            c.lead = i + 1;
            c.strength = 0.2 + 0.6 * unif(rng);
            c.scatterer_vector = s_frame[static_cast<std::size_t>(l)];
            c.lead_vector = lead_vector_from_dense(f_frame[static_cast<std::size_t>(l)]);
            spec.couplings.push_back(c);
        }
    }

    if (n_leads >= 2 && unif(rng) < 0.5) {
        mesolb::DirectContactTerm t;
        t.lead_j = 1 + static_cast<int>(unif(rng) * (n_leads - 1e-9));
        do {
            t.lead_k = 1 + static_cast<int>(unif(rng) * (n_leads - 1e-9));
        } while (t.lead_k == t.lead_j);
        t.strength = 0.2 + 0.4 * unif(rng);
        t.vector_j = lead_vector_from_dense(random_unit(rng, 2, complex_model));
        t.vector_k = lead_vector_from_dense(random_unit(rng, 2, complex_model));
        spec.contacts.push_back(t);
    }
    return spec;
}

inline mesolb::SystemModel random_model(std::mt19937_64& rng, int n_leads) {
    return mesolb::validate_model(random_spec(rng, n_leads));
}

inline std::vector<mesolb::ReservoirState> random_states(std::mt19937_64& rng, int n_leads) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<mesolb::ReservoirState> states;
    for (int i = 0; i < n_leads; ++i)
        states.push_back({1.0 + 9.0 * unif(rng), 0.6 * (unif(rng) - 0.5)});
    return states;
}

// ---------------------------------------------------------------------------
// Brute-force oracles.

// <f, (H_L - z)^{-1} g> on the L-site truncated chain by a tridiagonal
// (Thomas) solve; independent of the closed-form Green function.
inline cdouble truncated_chain_resolvent(double onsite, double hopping, int length, cdouble z,
                                         const mesolb::LeadVector& f, const mesolb::LeadVector& g) {
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(length);
    for (std::size_t i = 0; i < g.sites.size(); ++i)
        rhs[g.sites[i] - 1] = g.amps[static_cast<Eigen::Index>(i)];
    Eigen::VectorXcd diag = Eigen::VectorXcd::Constant(length, onsite - z);
    // forward elimination
    for (int i = 1; i < length; ++i) {
        const cdouble w = hopping / diag[i - 1];
        diag[i] -= w * hopping;
        rhs[i] -= w * rhs[i - 1];
    }
    Eigen::VectorXcd x(length);
    x[length - 1] = rhs[length - 1] / diag[length - 1];
    for (int i = length - 2; i >= 0; --i) x[i] = (rhs[i] - hopping * x[i + 1]) / diag[i];
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i)
        acc += std::conj(f.amps[static_cast<Eigen::Index>(i)]) * x[f.sites[i] - 1];
    return acc;
}

// Spectral weight of one site of the L-site chain inside [lo, hi], from the
// closed-form sine eigenvectors.
inline double chain_window_weight(double onsite, double hopping, int length, int site, double lo,
                                  double hi) {
    double acc = 0.0;
    for (int q = 1; q <= length; ++q) {
        const double lambda = onsite + 2.0 * hopping * std::cos(M_PI * q / (length + 1.0));
        if (lambda < lo || lambda > hi) continue;
        const double amp = std::sqrt(2.0 / (length + 1.0)) * std::sin(M_PI * q * site / (length + 1.0));
        acc += amp * amp;
    }
    return acc;
}

// Eigenvalues of a real symmetric tridiagonal matrix.
inline Eigen::VectorXd tridiag_eigenvalues(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

}  // namespace testutil
