#include "mesolb/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mesolb {

validation_error::validation_error(std::vector<std::string> v)
    : error(v.empty() ? "model invalid"
                      : "model invalid: " + v.front() +
                            (v.size() > 1 ? " (+" + std::to_string(v.size() - 1) + " more)" : "")),
      violations(std::move(v)) {}

cdouble LeadVector::dot(const LeadVector& other) const {
    cdouble acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < sites.size() && j < other.sites.size()) {
        if (sites[i] < other.sites[j]) {
            ++i;
        } else if (sites[i] > other.sites[j]) {
            ++j;
        } else {
            acc += std::conj(amps[static_cast<Eigen::Index>(i)]) *
                   other.amps[static_cast<Eigen::Index>(j)];
            ++i;
            ++j;
        }
    }
    return acc;
}

namespace {

constexpr double kNormTol = 1e-12;

// Sorts by site, drops exact zeros; reports bad site indices and duplicates.
bool normalize_lead_vector(LeadVector& v, const std::string& what,
                           std::vector<std::string>& violations) {
    const auto n = v.sites.size();
    if (static_cast<std::size_t>(v.amps.size()) != n) {
        violations.push_back(what + ": site/amplitude length mismatch");
        return false;
    }
    std::vector<std::pair<int, cdouble>> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (v.sites[i] < 1) {
            violations.push_back(what + ": site index " + std::to_string(v.sites[i]) + " < 1");
            return false;
        }
        if (v.amps[static_cast<Eigen::Index>(i)] != cdouble(0.0, 0.0))
            entries.emplace_back(v.sites[i], v.amps[static_cast<Eigen::Index>(i)]);
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].first == entries[i - 1].first) {
            violations.push_back(what + ": duplicate site " + std::to_string(entries[i].first));
            return false;
        }
    }
    v.sites.resize(entries.size());
    v.amps.resize(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        v.sites[i] = entries[i].first;
        v.amps[static_cast<Eigen::Index>(i)] = entries[i].second;
    }
    return true;
}

bool is_unit(double norm) { return std::abs(norm - 1.0) <= kNormTol; }

bool vector_is_real(const Eigen::VectorXcd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i].imag() != 0.0) return false;
    return true;
}

}  // namespace

std::vector<std::string> check_model(const ModelSpec& raw) {
    ModelSpec spec = raw;
    std::vector<std::string> violations;

    const Eigen::Index m = spec.scatterer.rows();
    if (m < 1 || spec.scatterer.cols() != m) {
        violations.push_back("scatterer: matrix must be square with M >= 1");
        return violations;
    }
    double scale = spec.scatterer.cwiseAbs().maxCoeff();
    double herm = (spec.scatterer - spec.scatterer.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12 * std::max(1.0, scale)) violations.push_back("scatterer not self-adjoint");

    if (spec.charge <= 0.0) violations.push_back("charge must be positive");

    std::set<int> ids;
    for (std::size_t i = 0; i < spec.leads.size(); ++i) {
        const auto& lead = spec.leads[i];
        if (!ids.insert(lead.id).second)
            violations.push_back("leads[" + std::to_string(i) + "]: duplicate id " +
                                 std::to_string(lead.id));
        if (!(lead.hopping > 0.0))
            violations.push_back("leads[" + std::to_string(i) + "]: hopping must be positive");
    }

    auto known_lead = [&](int id) { return ids.count(id) != 0; };

    for (std::size_t i = 0; i < spec.couplings.size(); ++i) {
        auto& c = spec.couplings[i];
        const std::string what = "couplings[" + std::to_string(i) + "]";
        if (!known_lead(c.lead)) violations.push_back(what + ": unknown lead id " + std::to_string(c.lead));
        if (!(c.strength > 0.0)) violations.push_back(what + ": strength must be positive");
        if (c.scatterer_vector.size() != m)
            violations.push_back(what + ": scatterer vector has wrong dimension");
        else if (!is_unit(c.scatterer_vector.norm()))
            violations.push_back(what + ": scatterer vector not unit norm");
        if (normalize_lead_vector(c.lead_vector, what + ".lead_vector", violations)) {
            if (!is_unit(c.lead_vector.norm()))
                violations.push_back(what + ": lead vector not unit norm");
        }
    }

    for (std::size_t i = 0; i < spec.contacts.size(); ++i) {
        auto& c = spec.contacts[i];
        const std::string what = "contacts[" + std::to_string(i) + "]";
        if (c.lead_j == c.lead_k) violations.push_back(what + ": leads must differ");
        if (!known_lead(c.lead_j)) violations.push_back(what + ": unknown lead id " + std::to_string(c.lead_j));
        if (!known_lead(c.lead_k)) violations.push_back(what + ": unknown lead id " + std::to_string(c.lead_k));
        if (!(c.strength > 0.0)) violations.push_back(what + ": strength must be positive");
        if (normalize_lead_vector(c.vector_j, what + ".vector_j", violations) &&
            !is_unit(c.vector_j.norm()))
            violations.push_back(what + ": vector_j not unit norm");
        if (normalize_lead_vector(c.vector_k, what + ".vector_k", violations) &&
            !is_unit(c.vector_k.norm()))
            violations.push_back(what + ": vector_k not unit norm");
    }

    // Orthonormality within each family: {f_jl}_l and {s_jl}_l per lead,
    // contact vectors per lead.
    for (std::size_t i = 0; i < spec.couplings.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.couplings.size(); ++j) {
            const auto& a = spec.couplings[i];
            const auto& b = spec.couplings[j];
            if (a.lead != b.lead) continue;
            if (std::abs(a.lead_vector.dot(b.lead_vector)) > kNormTol)
                violations.push_back("couplings[" + std::to_string(i) + "," + std::to_string(j) +
                                     "]: lead vectors not orthonormal");
            if (a.scatterer_vector.size() == m && b.scatterer_vector.size() == m &&
                std::abs(a.scatterer_vector.dot(b.scatterer_vector)) > kNormTol)
                violations.push_back("couplings[" + std::to_string(i) + "," + std::to_string(j) +
                                     "]: scatterer vectors not orthonormal");
        }
    }
    {
        // Collect contact vectors per lead, tagged with the contact index.
        std::map<int, std::vector<std::pair<std::size_t, const LeadVector*>>> families;
        for (std::size_t i = 0; i < spec.contacts.size(); ++i) {
            families[spec.contacts[i].lead_j].emplace_back(i, &spec.contacts[i].vector_j);
            families[spec.contacts[i].lead_k].emplace_back(i, &spec.contacts[i].vector_k);
        }
        for (const auto& [lead, family] : families) {
            for (std::size_t a = 0; a < family.size(); ++a)
                for (std::size_t b = a + 1; b < family.size(); ++b)
                    if (std::abs(family[a].second->dot(*family[b].second)) > kNormTol)
                        violations.push_back("contacts[" + std::to_string(family[a].first) + "," +
                                             std::to_string(family[b].first) +
                                             "]: contact vectors on lead " + std::to_string(lead) +
                                             " not orthonormal");
        }
    }

    return violations;
}

SystemModel validate_model(const ModelSpec& raw) {
    auto violations = check_model(raw);
    if (!violations.empty()) throw validation_error(std::move(violations));

    SystemModel model;
    model.spec_ = raw;
    auto& spec = model.spec_;

    std::vector<std::string> scratch;
    for (auto& c : spec.couplings) normalize_lead_vector(c.lead_vector, "", scratch);
    for (auto& c : spec.contacts) {
        normalize_lead_vector(c.vector_j, "", scratch);
        normalize_lead_vector(c.vector_k, "", scratch);
    }

    // Derived: coupling_sites per lead, union of all vector supports there.
    std::map<int, std::set<int>> sites;
    for (const auto& c : spec.couplings)
        sites[c.lead].insert(c.lead_vector.sites.begin(), c.lead_vector.sites.end());
    for (const auto& c : spec.contacts) {
        sites[c.lead_j].insert(c.vector_j.sites.begin(), c.vector_j.sites.end());
        sites[c.lead_k].insert(c.vector_k.sites.begin(), c.vector_k.sites.end());
    }
    for (auto& lead : spec.leads) {
        lead.coupling_sites.clear();
        auto it = sites.find(lead.id);
        if (it != sites.end()) lead.coupling_sites.assign(it->second.begin(), it->second.end());
    }

    bool all_real = spec.scatterer.imag().cwiseAbs().maxCoeff() == 0.0;
    for (const auto& c : spec.couplings)
        all_real = all_real && vector_is_real(c.scatterer_vector) &&
                   vector_is_real(c.lead_vector.amps);
    for (const auto& c : spec.contacts)
        all_real = all_real && vector_is_real(c.vector_j.amps) && vector_is_real(c.vector_k.amps);
    model.all_real_ = all_real;
    return model;
}

const LeadSpec& SystemModel::lead(int id) const {
    for (const auto& l : spec_.leads)
        if (l.id == id) return l;
    throw error("unknown lead id " + std::to_string(id));
}

int SystemModel::lead_index(int id) const {
    for (std::size_t i = 0; i < spec_.leads.size(); ++i)
        if (spec_.leads[i].id == id) return static_cast<int>(i);
    return -1;
}

std::pair<double, double> band(const LeadSpec& lead) {
    return {lead.onsite - 2.0 * lead.hopping, lead.onsite + 2.0 * lead.hopping};
}

bool band_contains(const LeadSpec& lead, double energy) {
    auto [lo, hi] = band(lead);
    return energy > lo && energy < hi;
}

std::vector<int> open_channels(const SystemModel& model, double energy) {
    std::vector<int> out;
    for (const auto& lead : model.leads())
        if (band_contains(lead, energy)) out.push_back(lead.id);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mesolb
