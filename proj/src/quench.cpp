#include "mesolb/quench.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "mesolb/textio.hpp"

namespace mesolb {

namespace {

int max_coupling_site(const SystemModel& model) {
    int m = 0;
    for (const auto& c : model.couplings()) m = std::max(m, c.lead_vector.max_site());
    for (const auto& c : model.contacts())
        m = std::max({m, c.vector_j.max_site(), c.vector_k.max_site()});
    return m;
}

template <typename Scalar>
struct Engine {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    int dim = 0;
    int m_dim = 0;
    int sites = 0;
    Eigen::VectorXd evals;
    Mat evecs;
    Mat f_tilde;
    Mat h0_mat, v_mat;

    // coeff * |left><right| with left/right already rotated to the eigenbasis
    struct Rank {
        double coeff;
        Vec left, right;
    };
    std::vector<std::vector<Rank>> charge_pieces;  // per lead position
    std::vector<std::vector<Rank>> energy_pieces;
    std::vector<Rank> scatterer_pieces;

    static Scalar from_complex(cdouble z) {
        if constexpr (std::is_same_v<Scalar, double>)
            return z.real();
        else
            return z;
    }

    int lead_offset(int lead_pos) const { return m_dim + lead_pos * sites; }

    Vec embed_scatterer(const Eigen::VectorXcd& s) const {
        Vec out = Vec::Zero(dim);
        for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = from_complex(s[i]);
        return out;
    }

    Vec embed_lead(int lead_pos, const LeadVector& f) const {
        Vec out = Vec::Zero(dim);
        const int off = lead_offset(lead_pos);
        for (std::size_t i = 0; i < f.sites.size(); ++i)
            out[off + f.sites[i] - 1] = from_complex(f.amps[static_cast<Eigen::Index>(i)]);
        return out;
    }

    // Truncated chain block of lead `lead_pos` applied to a dense vector.
    Vec apply_chain(int lead_pos, const LeadSpec& lead, const Vec& x) const {
        Vec out = Vec::Zero(dim);
        const int off = lead_offset(lead_pos);
        for (int n = 0; n < sites; ++n) {
            Scalar acc = lead.onsite * x[off + n];
            if (n > 0) acc += lead.hopping * x[off + n - 1];
            if (n + 1 < sites) acc += lead.hopping * x[off + n + 1];
            out[off + n] = acc;
        }
        return out;
    }

    void build(const SystemModel& model, const std::vector<ReservoirState>& states, int length,
               double occupation) {
        m_dim = model.scatterer_dim();
        sites = length;
        const int n_leads = model.lead_count();
        dim = m_dim + n_leads * sites;

        h0_mat = Mat::Zero(dim, dim);
        for (int a = 0; a < m_dim; ++a)
            for (int b = 0; b < m_dim; ++b) h0_mat(a, b) = from_complex(model.scatterer()(a, b));
        for (int lp = 0; lp < n_leads; ++lp) {
            const auto& lead = model.leads()[static_cast<std::size_t>(lp)];
            const int off = lead_offset(lp);
            for (int n = 0; n < sites; ++n) {
                h0_mat(off + n, off + n) = lead.onsite;
                if (n + 1 < sites) {
                    h0_mat(off + n, off + n + 1) = lead.hopping;
                    h0_mat(off + n + 1, off + n) = lead.hopping;
                }
            }
        }

        v_mat = Mat::Zero(dim, dim);
        auto add_term = [&](double strength, const Vec& x, const Vec& y) {
            v_mat += strength * (x * y.adjoint() + y * x.adjoint());
        };
        for (const auto& c : model.couplings())
            add_term(c.strength, embed_scatterer(c.scatterer_vector),
                     embed_lead(model.lead_index(c.lead), c.lead_vector));
        for (const auto& c : model.contacts())
            add_term(c.strength, embed_lead(model.lead_index(c.lead_j), c.vector_j),
                     embed_lead(model.lead_index(c.lead_k), c.vector_k));

        Eigen::SelfAdjointEigenSolver<Mat> solver(h0_mat + v_mat);
        if (solver.info() != Eigen::Success) throw error("finite-system diagonalization failed");
        evals = solver.eigenvalues();
        evecs = solver.eigenvectors();

        // F0: Fermi-Dirac of the decoupled truncated chains per lead block,
        // occupation * identity on the scatterer. The chain eigenvectors are
        // the sine transform, shared by all leads of equal length.
        Eigen::MatrixXd sine(sites, sites);
        const double norm = std::sqrt(2.0 / (sites + 1));
        for (int n = 0; n < sites; ++n)
            for (int q = 0; q < sites; ++q)
                sine(n, q) = norm * std::sin(pi * (n + 1.0) * (q + 1.0) / (sites + 1.0));

        Mat f0 = Mat::Zero(dim, dim);
        for (int a = 0; a < m_dim; ++a) f0(a, a) = occupation;
        for (int lp = 0; lp < n_leads; ++lp) {
            const auto& lead = model.leads()[static_cast<std::size_t>(lp)];
            const auto& state = states[static_cast<std::size_t>(lp)];
            Eigen::VectorXd occ(sites);
            for (int q = 0; q < sites; ++q)
                occ[q] = fermi_dirac(state,
                                     lead.onsite + 2.0 * lead.hopping *
                                                       std::cos(pi * (q + 1.0) / (sites + 1.0)));
            const Eigen::MatrixXd block = sine * occ.asDiagonal() * sine.transpose();
            const int off = lead_offset(lp);
            for (int a = 0; a < sites; ++a)
                for (int b = 0; b < sites; ++b) f0(off + a, off + b) = block(a, b);
        }
        f_tilde = evecs.adjoint() * f0 * evecs;

        // Commutator rank pieces, rotated once.
        charge_pieces.assign(static_cast<std::size_t>(n_leads), {});
        energy_pieces.assign(static_cast<std::size_t>(n_leads), {});
        auto rotated = [&](double coeff, const Vec& left, const Vec& right) {
            return Rank{coeff, evecs.adjoint() * left, evecs.adjoint() * right};
        };
        for (const auto& c : model.couplings()) {
            const int lp = model.lead_index(c.lead);
            const auto& lead = model.leads()[static_cast<std::size_t>(lp)];
            const Vec es = embed_scatterer(c.scatterer_vector);
            const Vec ef = embed_lead(lp, c.lead_vector);
            auto& cp = charge_pieces[static_cast<std::size_t>(lp)];
            cp.push_back(rotated(c.strength, es, ef));
            cp.push_back(rotated(-c.strength, ef, es));
            const Vec af = apply_chain(lp, lead, ef);
            auto& ep = energy_pieces[static_cast<std::size_t>(lp)];
            ep.push_back(rotated(c.strength, es, af));
            ep.push_back(rotated(-c.strength, af, es));
            scatterer_pieces.push_back(rotated(-c.strength, es, ef));
            scatterer_pieces.push_back(rotated(c.strength, ef, es));
        }
        for (const auto& c : model.contacts()) {
            const int pj = model.lead_index(c.lead_j);
            const int pk = model.lead_index(c.lead_k);
            const Vec gj = embed_lead(pj, c.vector_j);
            const Vec gk = embed_lead(pk, c.vector_k);
            auto& cj = charge_pieces[static_cast<std::size_t>(pj)];
            cj.push_back(rotated(-c.strength, gj, gk));
            cj.push_back(rotated(c.strength, gk, gj));
            auto& ck = charge_pieces[static_cast<std::size_t>(pk)];
            ck.push_back(rotated(c.strength, gj, gk));
            ck.push_back(rotated(-c.strength, gk, gj));

            const Vec agj = apply_chain(pj, model.leads()[static_cast<std::size_t>(pj)], gj);
            auto& ej = energy_pieces[static_cast<std::size_t>(pj)];
            ej.push_back(rotated(-c.strength, agj, gk));
            ej.push_back(rotated(c.strength, gk, agj));
            const Vec agk = apply_chain(pk, model.leads()[static_cast<std::size_t>(pk)], gk);
            auto& ek = energy_pieces[static_cast<std::size_t>(pk)];
            ek.push_back(rotated(c.strength, gj, agk));
            ek.push_back(rotated(-c.strength, agk, gj));
        }
    }

    Eigen::VectorXcd phases(double time) const {
        Eigen::VectorXcd z(dim);
        for (int i = 0; i < dim; ++i) z[i] = std::polar(1.0, evals[i] * time);
        return z;
    }

    cdouble trace_at(const std::vector<Rank>& pieces, const Eigen::VectorXcd& z) const {
        cdouble acc = 0.0;
        for (const auto& r : pieces) {
            Eigen::VectorXcd u(dim), w(dim);
            if constexpr (std::is_same_v<Scalar, double>) {
                u = z.array() * r.left.template cast<cdouble>().array();
                w = z.array() * r.right.template cast<cdouble>().array();
                const Eigen::VectorXd yr = f_tilde * u.real();
                const Eigen::VectorXd yi = f_tilde * u.imag();
                cdouble dot = 0.0;
                for (int i = 0; i < dim; ++i)
                    dot += std::conj(w[i]) * cdouble(yr[i], yi[i]);
                acc += r.coeff * dot;
            } else {
                u = z.array() * r.left.array();
                w = z.array() * r.right.array();
                const Eigen::VectorXcd y = f_tilde * u;
                acc += r.coeff * w.dot(y);
            }
        }
        return acc;
    }
};

cdouble checked_real(cdouble raw, const char* what) {
    if (std::abs(raw.imag()) > 1e-10 * std::max(1.0, std::abs(raw)))
        throw error(std::string(what) + ": trace not real, imag=" + format_double(raw.imag()));
    return raw;
}

}  // namespace

struct FiniteSystem::Impl {
    bool real_path = false;
    Engine<double> re;
    Engine<cdouble> cx;

    const Eigen::VectorXd& evals() const { return real_path ? re.evals : cx.evals; }

    void currents_at(double time, double charge_unit, Eigen::VectorXd& charge,
                     Eigen::VectorXd& energy) const {
        if (real_path)
            currents_impl(re, time, charge_unit, charge, energy);
        else
            currents_impl(cx, time, charge_unit, charge, energy);
    }

    template <typename E>
    static void currents_impl(const E& eng, double time, double charge_unit,
                              Eigen::VectorXd& charge, Eigen::VectorXd& energy) {
        const Eigen::VectorXcd z = eng.phases(time);
        const int n = static_cast<int>(eng.charge_pieces.size());
        charge.resize(n);
        energy.resize(n);
        for (int k = 0; k < n; ++k) {
            const cdouble raw_c =
                cdouble(0.0, 1.0) *
                eng.trace_at(eng.charge_pieces[static_cast<std::size_t>(k)], z);
            charge[k] = charge_unit * checked_real(raw_c, "charge current").real();
            const cdouble raw_e =
                cdouble(0.0, -1.0) *
                eng.trace_at(eng.energy_pieces[static_cast<std::size_t>(k)], z);
            energy[k] = checked_real(raw_e, "energy current").real();
        }
    }

    double scatterer_rate(double time, double charge_unit) const {
        const auto run = [&](const auto& eng) {
            const Eigen::VectorXcd z = eng.phases(time);
            const cdouble raw = cdouble(0.0, 1.0) * eng.trace_at(eng.scatterer_pieces, z);
            return charge_unit * checked_real(raw, "scatterer charge rate").real();
        };
        return real_path ? run(re) : run(cx);
    }
};

FiniteSystem::FiniteSystem(const SystemModel& model, const std::vector<ReservoirState>& states,
                           int sites_per_lead, double scatterer_occupation)
    : impl_(std::make_unique<Impl>()),
      sites_per_lead_(sites_per_lead),
      occupation_(scatterer_occupation),
      charge_(model.charge()) {
    if (static_cast<int>(states.size()) != model.lead_count())
        throw validation_error({"quench: need one reservoir state per lead"});
    for (const auto& s : states)
        if (!(s.beta > 0.0)) throw validation_error({"quench: beta must be positive"});
    const int min_l = max_coupling_site(model) + 10;
    if (sites_per_lead < min_l)
        throw validation_error({"quench: lead length " + std::to_string(sites_per_lead) +
                                " below minimum " + std::to_string(min_l)});
    for (const auto& lead : model.leads()) {
        lead_ids_.push_back(lead.id);
        max_hopping_ = std::max(max_hopping_, lead.hopping);
    }
    impl_->real_path = model.all_real();
    if (impl_->real_path)
        impl_->re.build(model, states, sites_per_lead, scatterer_occupation);
    else
        impl_->cx.build(model, states, sites_per_lead, scatterer_occupation);
    dim_ = impl_->real_path ? impl_->re.dim : impl_->cx.dim;
}

FiniteSystem::~FiniteSystem() = default;
FiniteSystem::FiniteSystem(FiniteSystem&&) noexcept = default;
FiniteSystem& FiniteSystem::operator=(FiniteSystem&&) noexcept = default;

const Eigen::VectorXd& FiniteSystem::eigenvalues() const { return impl_->evals(); }

Eigen::MatrixXcd FiniteSystem::h0() const {
    return impl_->real_path ? impl_->re.h0_mat.cast<cdouble>().eval() : impl_->cx.h0_mat;
}

Eigen::MatrixXcd FiniteSystem::v() const {
    return impl_->real_path ? impl_->re.v_mat.cast<cdouble>().eval() : impl_->cx.v_mat;
}

Eigen::MatrixXcd FiniteSystem::eigenvectors() const {
    return impl_->real_path ? impl_->re.evecs.cast<cdouble>().eval() : impl_->cx.evecs;
}

std::pair<double, double> FiniteSystem::transient_current(int lead_id, double time) const {
    Eigen::VectorXd charge, energy;
    impl_->currents_at(time, charge_, charge, energy);
    for (std::size_t i = 0; i < lead_ids_.size(); ++i)
        if (lead_ids_[i] == lead_id)
            return {charge[static_cast<Eigen::Index>(i)], energy[static_cast<Eigen::Index>(i)]};
    throw error("unknown lead id " + std::to_string(lead_id));
}

void FiniteSystem::currents_at(double time, Eigen::VectorXd& charge, Eigen::VectorXd& energy) const {
    impl_->currents_at(time, charge_, charge, energy);
}

double FiniteSystem::scatterer_charge_rate(double time) const {
    return impl_->scatterer_rate(time, charge_);
}

FiniteSystem build_finite(const SystemModel& model, const std::vector<ReservoirState>& states,
                          int sites_per_lead, double scatterer_occupation) {
    return FiniteSystem(model, states, sites_per_lead, scatterer_occupation);
}

double echo_bound(const SystemModel& model, int sites_per_lead) {
    double max_t = 0.0;
    for (const auto& lead : model.leads()) max_t = std::max(max_t, lead.hopping);
    return 0.8 * sites_per_lead / (2.0 * max_t);
}

std::vector<QuenchSample> quench_series(const FiniteSystem& fin, const std::vector<double>& times,
                                        Exec exec) {
    std::vector<QuenchSample> out(times.size());
    const int n = static_cast<int>(times.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
    for (int i = 0; i < n; ++i) {
        auto& s = out[static_cast<std::size_t>(i)];
        s.time = times[static_cast<std::size_t>(i)];
        fin.currents_at(s.time, s.charge, s.energy);
    }
    return out;
}

SteadyComparison steady_compare(const FiniteSystem& fin, const SystemModel& model,
                                const std::vector<ReservoirState>& states, double window_lo,
                                double window_hi, int samples, const Tolerances& tol,
                                const QuadratureOptions& opt) {
    SteadyComparison cmp;
    cmp.echo_bound = echo_bound(model, fin.sites_per_lead());
    if (!(window_lo >= 0.0) || !(window_hi > window_lo))
        throw validation_error({"quench: window must satisfy 0 <= T1 < T2"});
    if (window_hi > cmp.echo_bound * (1.0 + 1e-12))
        throw validation_error({"quench: window end " + format_double(window_hi) +
                                " exceeds reflection bound " + format_double(cmp.echo_bound)});
    if (samples < 2) throw validation_error({"quench: need at least 2 samples"});

    cmp.window_lo = window_lo;
    cmp.window_hi = window_hi;
    cmp.samples = samples;

    std::vector<double> times(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i)
        times[static_cast<std::size_t>(i)] =
            window_lo + (window_hi - window_lo) * i / (samples - 1.0);
    cmp.series = quench_series(fin, times, opt.exec);
    const auto& series = cmp.series;

    const auto lb = compute_transport(model, states, tol, opt);
    cmp.lb_quadrature = lb.quadrature;

    const int n = model.lead_count();
    for (int k = 0; k < n; ++k) {
        SteadyLead row;
        row.lead_id = model.leads()[static_cast<std::size_t>(k)].id;
        double min_c = series.front().charge[k], max_c = min_c;
        double min_e = series.front().energy[k], max_e = min_e;
        double sum_c = 0.0, sum_e = 0.0;
        for (const auto& s : series) {
            sum_c += s.charge[k];
            sum_e += s.energy[k];
            min_c = std::min(min_c, s.charge[k]);
            max_c = std::max(max_c, s.charge[k]);
            min_e = std::min(min_e, s.energy[k]);
            max_e = std::max(max_e, s.energy[k]);
        }
        row.mean_charge = sum_c / samples;
        row.mean_energy = sum_e / samples;
        row.band_charge = max_c - min_c;
        row.band_energy = max_e - min_e;
        row.lb_charge = lb.charge_current[k];
        row.lb_energy = lb.energy_current[k];
        row.rel_dev_charge =
            std::abs(row.mean_charge - row.lb_charge) / std::max(std::abs(row.lb_charge), 1e-300);
        row.rel_dev_energy =
            std::abs(row.mean_energy - row.lb_energy) / std::max(std::abs(row.lb_energy), 1e-300);
        cmp.leads.push_back(row);
    }

    cmp.bound_states = scan_bound_states(model, 600, tol);
    cmp.bound_state_warning = !cmp.bound_states.empty();
    return cmp;
}

}  // namespace mesolb
