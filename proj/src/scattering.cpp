#include "mesolb/scattering.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mesolb/textio.hpp"

namespace mesolb {

namespace {

// One rank factor of V with its location tag, densified over the block's
// site union (leads) or the scatterer basis.
struct Factor {
    int location;
    Eigen::VectorXcd dense;
};

LeadVector to_lead_vector(const std::vector<int>& sites, const Eigen::VectorXcd& dense) {
    LeadVector v;
    for (Eigen::Index i = 0; i < dense.size(); ++i) {
        if (dense[i] != cdouble(0.0, 0.0)) {
            v.sites.push_back(sites[static_cast<std::size_t>(i)]);
            v.amps.conservativeResize(v.amps.size() + 1);
            v.amps[v.amps.size() - 1] = dense[i];
        }
    }
    return v;
}

Eigen::VectorXcd densify(const LeadVector& v, const std::map<int, int>& site_pos, int dim) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
    for (std::size_t i = 0; i < v.sites.size(); ++i)
        out[site_pos.at(v.sites[i])] = v.amps[static_cast<Eigen::Index>(i)];
    return out;
}

double band_edge_slack(const LeadSpec& lead) {
    auto [lo, hi] = band(lead);
    return 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
}

}  // namespace

CouplingSubspace coupling_subspace(const SystemModel& model) {
    CouplingSubspace sub;
    const int m_dim = model.scatterer_dim();

    // Collect rank factors in deterministic order, tagged by location.
    // Couplings contribute (s, f); contacts contribute (g_j, g_k).
    std::vector<Factor> xs, ys;  // term i: v_i (|x_i><y_i| + |y_i><x_i|)
    std::vector<double> strengths;

    // Per-lead site unions for densification.
    std::map<int, std::vector<int>> lead_sites;
    for (const auto& lead : model.leads()) lead_sites[lead.id] = lead.coupling_sites;
    std::map<int, std::map<int, int>> site_pos;
    for (const auto& [id, sites] : lead_sites)
        for (std::size_t i = 0; i < sites.size(); ++i) site_pos[id][sites[i]] = static_cast<int>(i);

    auto densify_on_lead = [&](int lead_id, const LeadVector& v) {
        return densify(v, site_pos.at(lead_id), static_cast<int>(lead_sites.at(lead_id).size()));
    };

    for (const auto& c : model.couplings()) {
        xs.push_back({-1, c.scatterer_vector});
        ys.push_back({c.lead, densify_on_lead(c.lead, c.lead_vector)});
        strengths.push_back(c.strength);
    }
    for (const auto& c : model.contacts()) {
        xs.push_back({c.lead_j, densify_on_lead(c.lead_j, c.vector_j)});
        ys.push_back({c.lead_k, densify_on_lead(c.lead_k, c.vector_k)});
        strengths.push_back(c.strength);
    }

    // Per-location modified Gram-Schmidt with duplicate collapse. Blocks are
    // processed in the fixed order: scatterer, then leads in model order;
    // within a block, coupling vectors precede contact vectors.
    struct Block {
        std::vector<Eigen::VectorXcd> ortho;  // accepted orthonormal vectors
        std::vector<int> basis_index;         // global index of each accepted vector
    };
    std::map<int, Block> blocks;

    auto feed = [&](int location, const Eigen::VectorXcd& vec) {
        auto& block = blocks[location];
        Eigen::VectorXcd r = vec;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : block.ortho) r -= b.dot(r) * b;
        if (r.norm() <= 2e-13) return;  // duplicate or linearly dependent
        r /= r.norm();
        block.ortho.push_back(r);
        block.basis_index.push_back(-1);  // assigned below
    };

    for (const auto& c : model.couplings()) feed(-1, c.scatterer_vector);
    for (const auto& lead : model.leads()) {
        for (const auto& c : model.couplings())
            if (c.lead == lead.id) feed(lead.id, densify_on_lead(lead.id, c.lead_vector));
        for (const auto& c : model.contacts()) {
            if (c.lead_j == lead.id) feed(lead.id, densify_on_lead(lead.id, c.vector_j));
            if (c.lead_k == lead.id) feed(lead.id, densify_on_lead(lead.id, c.vector_k));
        }
    }

    // Assemble the basis: scatterer block first, then leads in model order.
    sub.lead_indices.resize(model.leads().size());
    auto emit_block = [&](int location) {
        auto it = blocks.find(location);
        if (it == blocks.end()) return;
        for (std::size_t i = 0; i < it->second.ortho.size(); ++i) {
            BasisVector b;
            b.location = location;
            if (location == -1) {
                b.scatterer_part = it->second.ortho[i];
                sub.scatterer_indices.push_back(sub.size());
            } else {
                b.lead_part = to_lead_vector(lead_sites.at(location), it->second.ortho[i]);
                sub.lead_indices[static_cast<std::size_t>(model.lead_index(location))].push_back(
                    sub.size());
            }
            it->second.basis_index[i] = sub.size();
            sub.basis.push_back(std::move(b));
        }
    };
    emit_block(-1);
    for (const auto& lead : model.leads()) emit_block(lead.id);

    // v_matrix[a][b] = <b_a, V b_b> = sum_i v_i (dx_i dy_i^H + dy_i dx_i^H)[a][b]
    // with dx_i[a] = <b_a, x_i>.
    const int r = sub.size();
    sub.v_matrix = Eigen::MatrixXcd::Zero(r, r);
    auto basis_dots = [&](const Factor& f) {
        Eigen::VectorXcd d = Eigen::VectorXcd::Zero(r);
        auto it = blocks.find(f.location);
        if (it == blocks.end()) return d;
        for (std::size_t i = 0; i < it->second.ortho.size(); ++i)
            d[it->second.basis_index[i]] = it->second.ortho[i].dot(f.dense);
        return d;
    };
    for (std::size_t i = 0; i < strengths.size(); ++i) {
        const Eigen::VectorXcd dx = basis_dots(xs[i]);
        const Eigen::VectorXcd dy = basis_dots(ys[i]);
        sub.v_matrix += strengths[i] * (dx * dy.adjoint() + dy * dx.adjoint());
    }

    // Scatterer spectral data for the resolvent block and pole exclusion.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model.scatterer());
    if (es.info() != Eigen::Success) throw error("scatterer eigendecomposition failed");
    sub.scatterer_eigenvalues = es.eigenvalues();
    sub.scatterer_eigenvectors = es.eigenvectors();
    sub.pole_scale = std::max(1.0, sub.scatterer_eigenvalues.cwiseAbs().maxCoeff());
    Eigen::MatrixXcd s_cols(m_dim, static_cast<Eigen::Index>(sub.scatterer_indices.size()));
    for (std::size_t i = 0; i < sub.scatterer_indices.size(); ++i)
        s_cols.col(static_cast<Eigen::Index>(i)) =
            sub.basis[static_cast<std::size_t>(sub.scatterer_indices[i])].scatterer_part;
    sub.scatterer_proj = es.eigenvectors().adjoint() * s_cols;
    return sub;
}

Eigen::MatrixXcd g0_matrix(const SystemModel& model, const CouplingSubspace& sub, double energy,
                           const Tolerances& tol) {
    for (const auto& lead : model.leads()) {
        auto [lo, hi] = band(lead);
        const double slack = band_edge_slack(lead);
        if (std::abs(energy - lo) <= slack || std::abs(energy - hi) <= slack)
            throw exceptional_energy(
                "exceptional energy: band edge of lead " + std::to_string(lead.id), energy);
    }
    for (Eigen::Index i = 0; i < sub.scatterer_eigenvalues.size(); ++i)
        if (std::abs(energy - sub.scatterer_eigenvalues[i]) <= tol.tol_pole * sub.pole_scale)
            throw exceptional_energy("exceptional energy: scatterer eigenvalue", energy);

    const int r = sub.size();
    Eigen::MatrixXcd g0 = Eigen::MatrixXcd::Zero(r, r);

    if (!sub.scatterer_indices.empty()) {
        Eigen::VectorXcd inv(sub.scatterer_eigenvalues.size());
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            inv[i] = 1.0 / (sub.scatterer_eigenvalues[i] - energy);
        const Eigen::MatrixXcd block =
            sub.scatterer_proj.adjoint() * inv.asDiagonal() * sub.scatterer_proj;
        for (std::size_t a = 0; a < sub.scatterer_indices.size(); ++a)
            for (std::size_t b = 0; b < sub.scatterer_indices.size(); ++b)
                g0(sub.scatterer_indices[a], sub.scatterer_indices[b]) =
                    block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }

    for (std::size_t li = 0; li < model.leads().size(); ++li) {
        const auto& lead = model.leads()[li];
        const auto& idx = sub.lead_indices[li];
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = 0; b < idx.size(); ++b)
                g0(idx[a], idx[b]) =
                    lead_resolvent(lead, energy, sub.basis[static_cast<std::size_t>(idx[a])].lead_part,
                                   sub.basis[static_cast<std::size_t>(idx[b])].lead_part);
    }
    return g0;
}

TMatrix t_matrix(const SystemModel& model, const CouplingSubspace& sub, double energy,
                 const Tolerances& tol) {
    const auto channels = open_channels(model, energy);
    if (channels.empty()) throw channel_closed("no open channels", energy);

    const int r = sub.size();
    const int c = static_cast<int>(channels.size());
    TMatrix t;
    t.energy = energy;
    t.channels = channels;

    if (r == 0) {
        t.entries = Eigen::MatrixXcd::Zero(c, c);
        t.condition = 1.0;
        return t;
    }

    const Eigen::MatrixXcd g0 = g0_matrix(model, sub, energy, tol);
    const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(r, r) + sub.v_matrix * g0;

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(r - 1);
    const double cond = smin > 0.0 ? svd.singularValues()(0) / smin
                                   : std::numeric_limits<double>::infinity();
    if (!(cond <= tol.cond_max))
        throw near_singular("near-singular at E=" + format_double(energy), energy, cond);

    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(r, c);
    for (int ci = 0; ci < c; ++ci) {
        const int li = model.lead_index(channels[static_cast<std::size_t>(ci)]);
        const auto& lead = model.leads()[static_cast<std::size_t>(li)];
        for (int ai : sub.lead_indices[static_cast<std::size_t>(li)])
            p(ai, ci) =
                generalized_fourier(lead, energy, sub.basis[static_cast<std::size_t>(ai)].lead_part);
    }

    const Eigen::MatrixXcd w = svd.solve(sub.v_matrix * p);
    t.entries = p.adjoint() * w;
    t.condition = cond;

    // The optical theorem holds exactly for the reduction; a residual above
    // tolerance means the solve lost accuracy (energy too close to a
    // scatterer eigenvalue), which callers treat like a near-singular node.
    // The unitarity residual of S = 1 - 2 pi i T is exactly 2 pi times the
    // optical residual, hence the factor.
    const auto res = scattering_residuals(t);
    if (res.optical * 2.0 * pi > tol.tol_scatter)
        throw near_singular("near-singular at E=" + format_double(energy) +
                                " (optical residual " + format_double(res.optical) + ")",
                            energy, cond);
    return t;
}

TMatrix t_matrix(const SystemModel& model, double energy, const Tolerances& tol) {
    return t_matrix(model, coupling_subspace(model), energy, tol);
}

SMatrix s_matrix(const TMatrix& t, const Tolerances& tol) {
    SMatrix s;
    s.energy = t.energy;
    s.channels = t.channels;
    const int c = t.channel_count();
    s.entries = Eigen::MatrixXcd::Identity(c, c) - cdouble(0.0, 2.0 * pi) * t.entries;
    s.unitarity_residual =
        (s.entries * s.entries.adjoint() - Eigen::MatrixXcd::Identity(c, c)).cwiseAbs().maxCoeff();
    if (s.unitarity_residual > tol.tol_scatter)
        throw error("scattering inconsistency: unitarity residual " +
                    format_double(s.unitarity_residual) + " at E=" + format_double(t.energy));
    return s;
}

ScatteringResiduals scattering_residuals(const TMatrix& t) {
    ScatteringResiduals r;
    const auto& m = t.entries;
    if (m.rows() == 0) return r;
    const Eigen::MatrixXcd mmh = m * m.adjoint();
    r.optical = (m - m.adjoint() + cdouble(0.0, 2.0 * pi) * mmh).cwiseAbs().maxCoeff();
    r.normality = (mmh - m.adjoint() * m).cwiseAbs().maxCoeff();
    const Eigen::VectorXd row = mmh.diagonal().real();
    const Eigen::VectorXd col = (m.adjoint() * m).diagonal().real();
    r.rowcol = (row - col).cwiseAbs().maxCoeff();
    return r;
}

Eigen::Matrix2cd friedrichs_reference_t(const FriedrichsParams& params, double energy) {
    if (!band_contains(params.lead1, energy) || !band_contains(params.lead2, energy))
        throw channel_closed("friedrichs reference: both channels must be open", energy);
    const cdouble f1 = generalized_fourier(params.lead1, energy, params.f1);
    const cdouble f2 = generalized_fourier(params.lead2, energy, params.f2);
    const cdouble r1 = lead_resolvent(params.lead1, energy, params.f1, params.f1);
    const cdouble r2 = lead_resolvent(params.lead2, energy, params.f2, params.f2);
    const cdouble d = energy - params.scatterer_energy + params.v1 * params.v1 * r1 +
                      params.v2 * params.v2 * r2;
    Eigen::Matrix2cd t;
    t(0, 0) = params.v1 * params.v1 * std::conj(f1) * f1 / d;
    t(0, 1) = params.v1 * params.v2 * std::conj(f1) * f2 / d;
    t(1, 0) = params.v2 * params.v1 * std::conj(f2) * f1 / d;
    t(1, 1) = params.v2 * params.v2 * std::conj(f2) * f2 / d;
    return t;
}

namespace {

double bound_determinant(const SystemModel& model, const CouplingSubspace& sub, double energy,
                         const Tolerances& tol) {
    const Eigen::MatrixXcd g0 = g0_matrix(model, sub, energy, tol);
    const int r = sub.size();
    const cdouble det =
        (Eigen::MatrixXcd::Identity(r, r) + sub.v_matrix * g0).determinant();
    return det.real();
}

}  // namespace

std::vector<double> bound_states(const SystemModel& model, std::pair<double, double> window,
                                 int grid, const Tolerances& tol) {
    auto [lo, hi] = window;
    if (!(lo < hi)) throw error("bound-state window is empty");
    for (const auto& lead : model.leads()) {
        auto [blo, bhi] = band(lead);
        if (lo < bhi && hi > blo)
            throw error("window overlapping a band: [" + format_double(lo) + "," +
                        format_double(hi) + "] intersects band of lead " + std::to_string(lead.id));
    }

    const auto sub = coupling_subspace(model);
    if (sub.basis.empty()) return {};

    // Split the window at scatterer eigenvalues: the determinant has poles
    // there, and a sign flip across a pole is not a root.
    const double zone = std::max(1e-9, tol.tol_pole * sub.pole_scale * 2.0);
    std::vector<std::pair<double, double>> segments{{lo, hi}};
    for (Eigen::Index i = 0; i < sub.scatterer_eigenvalues.size(); ++i) {
        const double ev = sub.scatterer_eigenvalues[i];
        std::vector<std::pair<double, double>> next;
        for (auto [a, b] : segments) {
            if (ev - zone > a && ev + zone < b) {
                next.emplace_back(a, ev - zone);
                next.emplace_back(ev + zone, b);
            } else if (ev > a - zone && ev < b + zone) {
                // eigenvalue near an end: shrink the segment away from it
                next.emplace_back(ev <= a + zone ? std::max(a, ev + zone) : a,
                                  ev >= b - zone ? std::min(b, ev - zone) : b);
            } else {
                next.emplace_back(a, b);
            }
        }
        segments = std::move(next);
    }

    std::vector<double> roots;
    const double span = hi - lo;
    for (auto [a, b] : segments) {
        // Inset from the segment ends: window endpoints may sit exactly on a
        // band edge where the resolvent is exceptional.
        a += 1e-9 * std::max(1.0, std::abs(a));
        b -= 1e-9 * std::max(1.0, std::abs(b));
        if (!(a < b)) continue;
        const int n = std::max(4, static_cast<int>(std::lround(grid * (b - a) / span)));
        double prev_e = a;
        double prev_v = bound_determinant(model, sub, a, tol);
        for (int i = 1; i <= n; ++i) {
            const double e = a + (b - a) * i / n;
            const double v = bound_determinant(model, sub, e, tol);
            if (prev_v == 0.0) {
                roots.push_back(prev_e);
            } else if (v != 0.0 && std::signbit(v) != std::signbit(prev_v)) {
                double x0 = prev_e, x1 = e, f0 = prev_v;
                while (x1 - x0 > 1e-10) {
                    const double mid = 0.5 * (x0 + x1);
                    const double fm = bound_determinant(model, sub, mid, tol);
                    if (fm == 0.0) {
                        x0 = x1 = mid;
                    } else if (std::signbit(fm) == std::signbit(f0)) {
                        x0 = mid;
                        f0 = fm;
                    } else {
                        x1 = mid;
                    }
                }
                roots.push_back(0.5 * (x0 + x1));
            }
            prev_e = e;
            prev_v = v;
        }
        if (prev_v == 0.0) roots.push_back(prev_e);
    }

    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-9; }),
                roots.end());
    return roots;
}

std::vector<double> scan_bound_states(const SystemModel& model, int grid_per_interval,
                                      const Tolerances& tol) {
    if (model.couplings().empty() && model.contacts().empty()) return {};

    std::vector<std::pair<double, double>> bands_list;
    double hull_lo = std::numeric_limits<double>::infinity();
    double hull_hi = -hull_lo;
    for (const auto& lead : model.leads()) {
        auto [lo, hi] = band(lead);
        bands_list.emplace_back(lo, hi);
        hull_lo = std::min(hull_lo, lo);
        hull_hi = std::max(hull_hi, hi);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model.scatterer());
    hull_lo = std::min(hull_lo, es.eigenvalues().minCoeff());
    hull_hi = std::max(hull_hi, es.eigenvalues().maxCoeff());

    double strength_sum = 0.0;
    for (const auto& c : model.couplings()) strength_sum += c.strength;
    for (const auto& c : model.contacts()) strength_sum += c.strength;
    const double margin = 1.0 + 2.0 * strength_sum;

    std::sort(bands_list.begin(), bands_list.end());
    std::vector<std::pair<double, double>> merged;
    for (auto [lo, hi] : bands_list) {
        if (!merged.empty() && lo <= merged.back().second)
            merged.back().second = std::max(merged.back().second, hi);
        else
            merged.emplace_back(lo, hi);
    }

    std::vector<std::pair<double, double>> gaps;
    double cursor = hull_lo - margin;
    for (auto [lo, hi] : merged) {
        if (lo > cursor) gaps.emplace_back(cursor, lo);
        cursor = std::max(cursor, hi);
    }
    if (hull_hi + margin > cursor) gaps.emplace_back(cursor, hull_hi + margin);

    std::vector<double> all;
    for (auto [a, b] : gaps) {
        if (b - a <= 1e-8) continue;
        auto roots = bound_states(model, {a, b}, grid_per_interval, tol);
        all.insert(all.end(), roots.begin(), roots.end());
    }
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace mesolb
