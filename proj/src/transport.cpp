#include "mesolb/transport.hpp"

#include <algorithm>
#include <cmath>

#include "mesolb/textio.hpp"

namespace mesolb {

double fermi_dirac(const ReservoirState& state, double energy) {
    const double x = state.beta * (energy - state.mu);
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

namespace {

struct GaussRule {
    Eigen::VectorXd nodes, weights;  // on [-1, 1]
};

GaussRule gauss_legendre(int n) {
    GaussRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double deriv = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            deriv = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / deriv;
            x -= dx;
            if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

// Maximal interval of constant open-channel set, with its substitution.
struct Interval {
    double lo = 0.0, hi = 0.0;     // energies
    double u_lo = 0.0, u_hi = 0.0; // integration coordinate
    bool theta = false;            // E = eps + 2 t cos(u) when set
    double eps = 0.0, t = 0.0;
    std::vector<int> open;
};

double clamp_unit(double x) { return std::min(1.0, std::max(-1.0, x)); }

std::vector<Interval> spectral_intervals(const SystemModel& model, int min_open) {
    std::vector<double> edges;
    for (const auto& lead : model.leads()) {
        auto [lo, hi] = band(lead);
        edges.push_back(lo);
        edges.push_back(hi);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    std::vector<Interval> out;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        Interval iv;
        iv.lo = edges[i];
        iv.hi = edges[i + 1];
        if (iv.hi - iv.lo <= 1e-14 * std::max(1.0, std::abs(iv.lo))) continue;
        const double mid = 0.5 * (iv.lo + iv.hi);
        bool homogeneous = true;
        bool first = true;
        for (const auto& lead : model.leads()) {
            if (!band_contains(lead, mid)) continue;
            iv.open.push_back(lead.id);
            if (first) {
                iv.eps = lead.onsite;
                iv.t = lead.hopping;
                first = false;
            } else if (lead.onsite != iv.eps || lead.hopping != iv.t) {
                homogeneous = false;
            }
        }
        if (static_cast<int>(iv.open.size()) < min_open) continue;
        iv.theta = homogeneous && !iv.open.empty();
        if (iv.theta) {
            iv.u_lo = std::acos(clamp_unit((iv.hi - iv.eps) / (2.0 * iv.t)));
            iv.u_hi = std::acos(clamp_unit((iv.lo - iv.eps) / (2.0 * iv.t)));
        } else {
            iv.u_lo = iv.lo;
            iv.u_hi = iv.hi;
        }
        out.push_back(std::move(iv));
    }
    return out;
}

double interval_energy(const Interval& iv, double u) {
    return iv.theta ? iv.eps + 2.0 * iv.t * std::cos(u) : u;
}

double interval_jacobian(const Interval& iv, double u) {
    return iv.theta ? 2.0 * iv.t * std::sin(u) : 1.0;
}

struct Panel {
    int interval = 0;
    double a = 0.0, b = 0.0;
    int depth = 0;
};

struct PanelEval {
    Eigen::VectorXd q1, q2;
    long evals = 0;
    std::vector<std::pair<double, Warning>> warnings;  // node energy + reason
    std::vector<double> excluded;
};

}  // namespace

Eigen::VectorXd integrate_spectral_vec(const SystemModel& model, int dim,
                                       const SpectralIntegrand& integrand,
                                       const QuadratureOptions& opt, QuadratureReport* report) {
    const auto intervals = spectral_intervals(model, opt.min_open_channels);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
    if (report) *report = QuadratureReport{};
    if (intervals.empty()) return total;

    const GaussRule rule = gauss_legendre(opt.gauss_order);
    double total_u = 0.0;
    for (const auto& iv : intervals) total_u += iv.u_hi - iv.u_lo;
    const double budget_density = opt.tol_quad / total_u;

    auto gauss_apply = [&](const Interval& iv, double a, double b, PanelEval& ev) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd tmp(dim);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int j = 0; j < opt.gauss_order; ++j) {
            const double u = mid + half * rule.nodes[j];
            const double energy = interval_energy(iv, u);
            Warning warn;
            ++ev.evals;
            tmp.setZero();
            if (integrand(energy, tmp, &warn)) {
                sum += (rule.weights[j] * half * interval_jacobian(iv, u)) * tmp;
                if (!warn.kind.empty()) ev.warnings.emplace_back(energy, warn);
            } else {
                if (warn.kind.empty()) warn.kind = "node_excluded";
                ev.warnings.emplace_back(energy, warn);
                ev.excluded.push_back(energy);
            }
        }
        return sum;
    };

    auto eval_panel = [&](const Panel& p) {
        PanelEval ev;
        const auto& iv = intervals[static_cast<std::size_t>(p.interval)];
        const double mid = 0.5 * (p.a + p.b);
        ev.q1 = gauss_apply(iv, p.a, p.b, ev);
        ev.q2 = gauss_apply(iv, p.a, mid, ev) + gauss_apply(iv, mid, p.b, ev);
        return ev;
    };

    // Seed panels: four per interval so the first error estimates see structure.
    std::vector<Panel> level;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        for (int part = 0; part < 4; ++part) {
            const double a = iv.u_lo + (iv.u_hi - iv.u_lo) * part / 4.0;
            const double b = iv.u_lo + (iv.u_hi - iv.u_lo) * (part + 1) / 4.0;
            level.push_back({static_cast<int>(i), a, b, 0});
        }
    }

    struct Accepted {
        int interval;
        double a;
        Eigen::VectorXd value;
        double err;
    };
    std::vector<Accepted> accepted;
    long node_count = 0;
    std::vector<std::pair<double, Warning>> warnings;
    std::vector<double> excluded;
    bool failed = false;
    Panel worst_panel;
    double worst_ratio = 0.0;

    while (!level.empty()) {
        if (level.size() > 200000)
            throw quadrature_error("quadrature panel count exploded", intervals.front().lo,
                                   intervals.back().hi);
        std::vector<PanelEval> evals(level.size());
        const int n_panels = static_cast<int>(level.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (opt.exec == Exec::parallel)
#endif
        for (int i = 0; i < n_panels; ++i)
            evals[static_cast<std::size_t>(i)] = eval_panel(level[static_cast<std::size_t>(i)]);

        std::vector<Panel> next;
        for (std::size_t i = 0; i < level.size(); ++i) {
            const Panel& p = level[i];
            PanelEval& ev = evals[i];
            node_count += ev.evals;
            for (auto& w : ev.warnings) warnings.push_back(std::move(w));
            excluded.insert(excluded.end(), ev.excluded.begin(), ev.excluded.end());

            const double budget = budget_density * (p.b - p.a);
            double ratio = 0.0;
            bool ok = true;
            for (int c = 0; c < dim; ++c) {
                const double err = std::abs(ev.q2[c] - ev.q1[c]);
                const double floor =
                    1.4e-14 * (std::abs(ev.q1[c]) + std::abs(ev.q2[c])) + 1e-300;
                if (err > budget + floor) ok = false;
                ratio = std::max(ratio, err / (budget + floor));
            }
            if (ok || p.depth >= opt.max_depth) {
                accepted.push_back({p.interval, p.a, ev.q2, (ev.q2 - ev.q1).cwiseAbs().maxCoeff()});
                if (!ok) {
                    failed = true;
                    if (ratio > worst_ratio) {
                        worst_ratio = ratio;
                        worst_panel = p;
                    }
                }
            } else {
                const double mid = 0.5 * (p.a + p.b);
                next.push_back({p.interval, p.a, mid, p.depth + 1});
                next.push_back({p.interval, mid, p.b, p.depth + 1});
            }
        }
        level = std::move(next);
    }

    std::sort(accepted.begin(), accepted.end(), [](const Accepted& x, const Accepted& y) {
        return x.interval != y.interval ? x.interval < y.interval : x.a < y.a;
    });
    double est_error = 0.0;
    for (const auto& acc : accepted) {
        total += acc.value;
        est_error += acc.err;
    }

    if (report) {
        report->node_count = node_count;
        report->estimated_error = est_error;
        std::sort(warnings.begin(), warnings.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [e, w] : warnings) report->warnings.push_back(std::move(w));
        std::sort(excluded.begin(), excluded.end());
        report->excluded_energies = std::move(excluded);
    }

    if (failed) {
        const auto& iv = intervals[static_cast<std::size_t>(worst_panel.interval)];
        double e0 = interval_energy(iv, worst_panel.a);
        double e1 = interval_energy(iv, worst_panel.b);
        if (e0 > e1) std::swap(e0, e1);
        throw quadrature_error("quadrature failed to converge on [" + format_double(e0) + "," +
                                   format_double(e1) + "]",
                               e0, e1);
    }
    return total;
}

namespace {

// Retries exceptional/near-singular evaluations at shifted energies, then
// gives the node up with a warning.
template <typename Eval>
bool guarded_node(double energy, double shift, Warning* warn, Eval&& eval) {
    const double shifts[3] = {0.0, shift, -shift};
    for (double s : shifts) {
        try {
            eval(energy + s);
            if (s != 0.0 && warn)
                *warn = Warning{"node_shifted",
                                {{"energy", format_double(energy)}, {"shift", format_double(s)}}};
            return true;
        } catch (const exceptional_energy&) {
        } catch (const near_singular&) {
        } catch (const channel_closed&) {
        }
    }
    if (warn)
        *warn = Warning{"node_excluded", {{"energy", format_double(energy)}}};
    return false;
}

}  // namespace

double integrate_spectral(const SystemModel& model, const std::function<double(double)>& integrand,
                          const QuadratureOptions& opt, QuadratureReport* report) {
    auto wrapped = [&](double energy, Eigen::Ref<Eigen::VectorXd> out, Warning* warn) {
        return guarded_node(energy, 1e-6 * std::max(1.0, std::abs(energy)), warn,
                            [&](double e) { out[0] = integrand(e); });
    };
    return integrate_spectral_vec(model, 1, wrapped, opt, report)[0];
}

TransportResult compute_transport(const SystemModel& model,
                                  const std::vector<ReservoirState>& states, const Tolerances& tol,
                                  const QuadratureOptions& opt) {
    const int n = model.lead_count();
    if (static_cast<int>(states.size()) != n)
        throw error("compute_transport: need one reservoir state per lead");
    for (const auto& s : states)
        if (!(s.beta > 0.0)) throw error("beta must be positive");

    const auto sub = coupling_subspace(model);
    const double shift = std::max(2.05 * tol.tol_pole * sub.pole_scale, 1e-11);
    const double e = model.charge();
    const int dim = 2 * n + 2 + n * n;

    // A node evaluated near a scatterer eigenvalue may carry an absolute
    // error up to ~1e-7 in |T|^2; that is far below tol_quad once weighted,
    // so the integrand accepts a looser residual than the S-matrix path.
    Tolerances node_tol = tol;
    node_tol.tol_scatter = std::max(tol.tol_scatter, 1e-6);

    auto integrand = [&](double energy, Eigen::Ref<Eigen::VectorXd> out, Warning* warn) {
        return guarded_node(energy, shift, warn, [&](double en) {
            const TMatrix t = t_matrix(model, sub, en, node_tol);
            const int c = t.channel_count();
            Eigen::VectorXd fd(c), x(c);
            std::vector<int> pos(static_cast<std::size_t>(c));
            for (int i = 0; i < c; ++i) {
                const int li = model.lead_index(t.channels[static_cast<std::size_t>(i)]);
                pos[static_cast<std::size_t>(i)] = li;
                fd[i] = fermi_dirac(states[static_cast<std::size_t>(li)], en);
                x[i] = states[static_cast<std::size_t>(li)].beta *
                       (en - states[static_cast<std::size_t>(li)].mu);
            }
            out.setZero();
            double sigma_b = 0.0, sigma_c = 0.0;
            for (int k = 0; k < c; ++k) {
                double s_k = 0.0;
                for (int j = 0; j < c; ++j) {
                    const double w = std::norm(t.entries(k, j));
                    s_k += (fd[k] - fd[j]) * w;
                    sigma_b += (fd[k] - fd[j]) * x[k] * w;
                    sigma_c += (fd[j] - fd[k]) * (x[k] - x[j]) * w;
                    out[2 * n + 2 + pos[static_cast<std::size_t>(k)] * n +
                        pos[static_cast<std::size_t>(j)]] = w;
                }
                out[pos[static_cast<std::size_t>(k)]] = -2.0 * e * pi * s_k;
                out[n + pos[static_cast<std::size_t>(k)]] = 2.0 * pi * en * s_k;
            }
            out[2 * n] = -2.0 * pi * sigma_b;
            out[2 * n + 1] = pi * sigma_c;
        });
    };

    QuadratureOptions vec_opt = opt;
    vec_opt.min_open_channels = std::max(opt.min_open_channels, 2);
    TransportResult result;
    const Eigen::VectorXd integral =
        integrate_spectral_vec(model, dim, integrand, vec_opt, &result.quadrature);

    result.lead_ids.reserve(static_cast<std::size_t>(n));
    for (const auto& lead : model.leads()) result.lead_ids.push_back(lead.id);
    result.charge_current = integral.segment(0, n);
    result.energy_current = integral.segment(n, n);
    result.particle_current = -result.charge_current / e;
    result.sum_charge = result.charge_current.sum();
    result.sum_energy = result.energy_current.sum();
    result.entropy.direct = integral[2 * n];
    result.entropy.symmetrized = integral[2 * n + 1];
    double from_currents = 0.0;
    for (int k = 0; k < n; ++k)
        from_currents -= states[static_cast<std::size_t>(k)].beta *
                         (result.energy_current[k] -
                          states[static_cast<std::size_t>(k)].mu * result.particle_current[k]);
    result.entropy.from_currents = from_currents;
    result.entropy.max_deviation = std::max(
        {std::abs(result.entropy.from_currents - result.entropy.direct),
         std::abs(result.entropy.from_currents - result.entropy.symmetrized),
         std::abs(result.entropy.direct - result.entropy.symmetrized)});
    result.channel_weight = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) result.channel_weight(k, j) = integral[2 * n + 2 + k * n + j];
    return result;
}

Eigen::VectorXd charge_currents(const SystemModel& model, const std::vector<ReservoirState>& states,
                                double tol_quad) {
    QuadratureOptions opt;
    opt.tol_quad = tol_quad;
    return compute_transport(model, states, Tolerances{}, opt).charge_current;
}

Eigen::VectorXd energy_currents(const SystemModel& model, const std::vector<ReservoirState>& states,
                                double tol_quad) {
    QuadratureOptions opt;
    opt.tol_quad = tol_quad;
    return compute_transport(model, states, Tolerances{}, opt).energy_current;
}

EntropyBreakdown entropy_production(const SystemModel& model,
                                    const std::vector<ReservoirState>& states, double tol_quad) {
    QuadratureOptions opt;
    opt.tol_quad = tol_quad;
    return compute_transport(model, states, Tolerances{}, opt).entropy;
}

PositivityVerdict positivity_verdict(const TransportResult& result, const SystemModel& model,
                                     const std::vector<ReservoirState>& states,
                                     const Tolerances& tol) {
    PositivityVerdict verdict;
    const int n = model.lead_count();
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            if (k == j) continue;
            if (result.channel_weight(k, j) > tol.channel_floor)
                verdict.nontrivial_channels.emplace_back(result.lead_ids[static_cast<std::size_t>(k)],
                                                         result.lead_ids[static_cast<std::size_t>(j)]);
        }
    }
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (states[static_cast<std::size_t>(a)].beta != states[static_cast<std::size_t>(b)].beta ||
                states[static_cast<std::size_t>(a)].mu != states[static_cast<std::size_t>(b)].mu)
                verdict.biased_pairs.emplace_back(result.lead_ids[static_cast<std::size_t>(a)],
                                                  result.lead_ids[static_cast<std::size_t>(b)]);
    for (const auto& [k, j] : verdict.nontrivial_channels) {
        const auto& sk = states[static_cast<std::size_t>(model.lead_index(k))];
        const auto& sj = states[static_cast<std::size_t>(model.lead_index(j))];
        if (sk.beta != sj.beta || sk.mu != sj.mu) {
            verdict.predicted_strict_positive = true;
            break;
        }
    }
    verdict.sigma = result.entropy.direct;
    verdict.satisfied = !verdict.predicted_strict_positive || verdict.sigma > tol.positivity_floor;
    return verdict;
}

PositivityVerdict positivity_verdict(const SystemModel& model,
                                     const std::vector<ReservoirState>& states,
                                     const Tolerances& tol, const QuadratureOptions& opt) {
    return positivity_verdict(compute_transport(model, states, tol, opt), model, states, tol);
}

}  // namespace mesolb
