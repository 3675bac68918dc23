#include "mesolb/leads.hpp"

#include <cmath>

namespace mesolb {

namespace {

// Band edges count as closed/exceptional within this absolute slack.
double edge_slack(const LeadSpec& lead) {
    auto [lo, hi] = band(lead);
    return 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
}

}  // namespace

LeadSpectralPoint wavenumber(const LeadSpec& lead, double energy) {
    auto [lo, hi] = band(lead);
    const double slack = edge_slack(lead);
    if (energy <= lo + slack || energy >= hi - slack)
        throw channel_closed("channel closed: E=" + std::to_string(energy) + " outside open band of lead " +
                                 std::to_string(lead.id),
                             energy);
    const double zeta = (energy - lead.onsite) / (2.0 * lead.hopping);
    LeadSpectralPoint p;
    p.lead_id = lead.id;
    p.energy = energy;
    p.wavenumber = std::acos(zeta);
    p.velocity_factor = 2.0 * lead.hopping * std::sin(p.wavenumber);
    return p;
}

double eigenfunction_amplitude(const LeadSpec& lead, double energy, int site) {
    const auto p = wavenumber(lead, energy);
    const double sink = std::sin(p.wavenumber);
    return std::sin(p.wavenumber * site) / std::sqrt(pi * lead.hopping * sink);
}

cdouble generalized_fourier(const LeadSpec& lead, double energy, const LeadVector& f) {
    const auto p = wavenumber(lead, energy);
    const double norm = 1.0 / std::sqrt(pi * lead.hopping * std::sin(p.wavenumber));
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i)
        acc += std::sin(p.wavenumber * f.sites[i]) * norm *
               std::conj(f.amps[static_cast<Eigen::Index>(i)]);
    return acc;
}

cdouble chain_decay_root(const LeadSpec& lead, double energy) {
    const double zeta = (energy - lead.onsite) / (2.0 * lead.hopping);
    const double slack = edge_slack(lead) / (2.0 * lead.hopping);
    if (std::abs(std::abs(zeta) - 1.0) <= slack)
        throw exceptional_energy("exceptional energy: band edge of lead " + std::to_string(lead.id),
                                 energy);
    if (std::abs(zeta) < 1.0) {
        // (H - E - i0)^{-1} continued from Im z > 0 selects e^{-ik}.
        return cdouble(zeta, -std::sqrt(1.0 - zeta * zeta));
    }
    const double mag = std::abs(zeta) + std::sqrt(zeta * zeta - 1.0);
    return cdouble((zeta > 0.0 ? 1.0 : -1.0) / mag, 0.0);
}

namespace {

cdouble green_entry_from_root(double hopping, cdouble chi, int m, int n) {
    const cdouble denom = hopping * (1.0 - chi * chi);
    return (std::pow(chi, m + n) - std::pow(chi, std::abs(m - n))) * chi / denom;
}

}  // namespace

cdouble chain_green_entry(const LeadSpec& lead, double energy, int m, int n) {
    return green_entry_from_root(lead.hopping, chain_decay_root(lead, energy), m, n);
}

cdouble lead_resolvent(const LeadSpec& lead, double energy, const LeadVector& f,
                       const LeadVector& g) {
    const cdouble chi = chain_decay_root(lead, energy);
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i) {
        const cdouble fi = std::conj(f.amps[static_cast<Eigen::Index>(i)]);
        for (std::size_t j = 0; j < g.sites.size(); ++j)
            acc += fi * green_entry_from_root(lead.hopping, chi, f.sites[i], g.sites[j]) *
                   g.amps[static_cast<Eigen::Index>(j)];
    }
    return acc;
}

}  // namespace mesolb
