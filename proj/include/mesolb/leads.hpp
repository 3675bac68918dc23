#pragma once

#include "mesolb/model.hpp"

namespace mesolb {

// Spectral parametrization of one in-band energy: E = onsite + 2t*cos(k),
// k in (0, pi). velocity_factor = |dE/dk| = 2t*sin(k).
struct LeadSpectralPoint {
    int lead_id = 0;
    double energy = 0.0;
    double wavenumber = 0.0;
    double velocity_factor = 0.0;
};

// Throws channel_closed at and outside the band edges.
LeadSpectralPoint wavenumber(const LeadSpec& lead, double energy);

// Energy-normalized generalized eigenfunction amplitude at a site:
// psi_E(n) = sin(k n) / sqrt(pi * t * sin k), so <psi_E, psi_E'> = delta(E - E').
double eigenfunction_amplitude(const LeadSpec& lead, double energy, int site);

// Generalized Fourier coefficient f(E) = sum_n psi_E(n) * conj(f(n)).
cdouble generalized_fourier(const LeadSpec& lead, double energy, const LeadVector& f);

// Root chi of chi + 1/chi = (E - onsite)/t with the branch of (H - E - i0)^{-1}:
// e^{-ik} inside the band, the real root with |chi| < 1 outside.
// Throws exceptional_energy at band edges.
cdouble chain_decay_root(const LeadSpec& lead, double energy);

// Matrix element G(m,n) = <delta_m, (H_lead - E - i0)^{-1} delta_n>
// = (chi^{m+n} - chi^{|m-n|}) * chi / (t * (1 - chi^2)).
cdouble chain_green_entry(const LeadSpec& lead, double energy, int m, int n);

// <f, (H_lead - E - i0)^{-1} g> for finitely supported f, g (f conjugated).
// Defined inside and outside the band; throws exceptional_energy at edges.
cdouble lead_resolvent(const LeadSpec& lead, double energy, const LeadVector& f,
                       const LeadVector& g);

}  // namespace mesolb
