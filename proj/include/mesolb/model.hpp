#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "mesolb/common.hpp"

namespace mesolb {

// Semi-infinite nearest-neighbour chain: H = onsite*Σ|n><n| + hopping*Σ(|n><n+1| + h.c.),
// sites n >= 1 counted from the contact end. Band is [onsite-2t, onsite+2t].
struct LeadSpec {
    int id = 0;
    double onsite = 0.0;
    double hopping = 1.0;
    // Sites carrying any coupling amplitude; filled in by validation.
    std::vector<int> coupling_sites;
};

// Finitely supported vector on lead sites, stored sparse and sorted by site.
struct LeadVector {
    std::vector<int> sites;   // ascending, 1-indexed from the boundary
    Eigen::VectorXcd amps;    // same length as sites

    int max_site() const { return sites.empty() ? 0 : sites.back(); }
    double norm() const { return amps.norm(); }
    cdouble dot(const LeadVector& other) const;  // conjugates *this
};

// One scatterer-lead rank term: strength * (|s><f| + |f><s|).
struct CouplingTerm {
    int lead = 0;
    double strength = 0.0;
    Eigen::VectorXcd scatterer_vector;
    LeadVector lead_vector;
};

// One lead-lead rank term: strength * (|g_j><g_k| + |g_k><g_j|).
struct DirectContactTerm {
    int lead_j = 0;
    int lead_k = 0;
    double strength = 0.0;
    LeadVector vector_j;
    LeadVector vector_k;
};

// Inverse temperature and chemical potential of one reservoir.
struct ReservoirState {
    double beta = 1.0;
    double mu = 0.0;
};

// Raw, unvalidated model description.
struct ModelSpec {
    Eigen::MatrixXcd scatterer;
    std::vector<LeadSpec> leads;
    std::vector<CouplingTerm> couplings;
    std::vector<DirectContactTerm> contacts;
    double charge = 1.0;
};

// Validated, immutable model. Safe to share read-only across threads.
class SystemModel {
public:
    const ModelSpec& spec() const { return spec_; }
    const Eigen::MatrixXcd& scatterer() const { return spec_.scatterer; }
    const std::vector<LeadSpec>& leads() const { return spec_.leads; }
    const std::vector<CouplingTerm>& couplings() const { return spec_.couplings; }
    const std::vector<DirectContactTerm>& contacts() const { return spec_.contacts; }
    double charge() const { return spec_.charge; }

    int scatterer_dim() const { return static_cast<int>(spec_.scatterer.rows()); }
    int lead_count() const { return static_cast<int>(spec_.leads.size()); }
    const LeadSpec& lead(int id) const;
    int lead_index(int id) const;  // position in leads(), -1 if absent

    // True when every matrix entry and coupling amplitude is real
    // (time-reversal symmetric data).
    bool all_real() const { return all_real_; }

private:
    friend SystemModel validate_model(const ModelSpec&);
    ModelSpec spec_;
    bool all_real_ = false;
};

// Returns the list of violations (empty when the description is valid).
std::vector<std::string> check_model(const ModelSpec& spec);

// Normalizes vector storage and returns the immutable model, or throws
// validation_error carrying every violation found.
SystemModel validate_model(const ModelSpec& spec);

// Absolutely continuous spectrum [onsite - 2t, onsite + 2t] of the chain.
std::pair<double, double> band(const LeadSpec& lead);

// True when E lies strictly inside the band (edges count as closed).
bool band_contains(const LeadSpec& lead, double energy);

// Ids of leads whose open band interior contains E, ascending.
std::vector<int> open_channels(const SystemModel& model, double energy);

}  // namespace mesolb
