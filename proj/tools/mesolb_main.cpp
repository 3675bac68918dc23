// mesolb: multi-terminal quantum transport on tight-binding leads.
//
// Subcommands: validate, bands, tmatrix, currents, entropy, verify, quench.
// Exit codes: 0 success, 1 validation failure, 2 numerical failure,
// 3 verification failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "mesolb/config.hpp"
#include "mesolb/kernels.hpp"
#include "mesolb/quench.hpp"
#include "mesolb/textio.hpp"

namespace {

using namespace mesolb;

struct CliOverrides {
    std::string config_path;
    std::string out_path;
    double tol_quad = -1.0;
    int lead_length = -1;
    int samples = -1;
    std::string grid;    // a:b:n
    std::string window;  // a:b
};

void apply_overrides(RunConfig& cfg, const CliOverrides& cli) {
    if (cli.tol_quad > 0.0) {
        cfg.tolerances.tol_quad = cli.tol_quad;
        cfg.quadrature.tol_quad = cli.tol_quad;
    }
    if (cli.lead_length > 0) cfg.lead_length = cli.lead_length;
    if (cli.samples > 1) cfg.samples = cli.samples;
    if (!cli.grid.empty()) {
        double a = 0.0, b = 0.0;
        int n = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(cli.grid);
        if (!(in >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || !(a < b) || n < 1)
            throw validation_error({"--grid: expected a:b:n with a<b, n>=1"});
        cfg.grid_lo = a;
        cfg.grid_hi = b;
        cfg.grid_points = n;
        cfg.grid_set = true;
    }
    if (!cli.window.empty()) {
        double a = 0.0, b = 0.0;
        char c1 = 0;
        std::istringstream in(cli.window);
        if (!(in >> a >> c1 >> b) || c1 != ':' || !(a < b))
            throw validation_error({"--window: expected T1:T2 with T1<T2"});
        cfg.window_lo = a;
        cfg.window_hi = b;
        cfg.window_set = true;
    }
}

// Primary CSV goes to --out or stdout; warnings and the run log to stderr.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw validation_error({"cannot open output file: " + path});
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

const std::vector<ReservoirState>& require_states(const RunConfig& cfg) {
    if (!cfg.has_states())
        throw validation_error({"config.reservoirs: required for this command"});
    return cfg.states;
}

int cmd_validate(const CliOverrides& cli) {
    // Reports all violations instead of stopping at the first.
    const ModelSpec spec = model_spec_from_config(cli.config_path);
    const auto violations = check_model(spec);
    Output out(cli.out_path);
    if (!violations.empty()) {
        for (const auto& v : violations) out.stream() << "error," << v << "\n";
        return 1;
    }
    const SystemModel model = validate_model(spec);
    out.stream() << "status,ok\n";
    out.stream() << "scatterer_dim," << model.scatterer_dim() << "\n";
    out.stream() << "leads," << model.lead_count() << "\n";
    out.stream() << "couplings," << model.couplings().size() << "\n";
    out.stream() << "contacts," << model.contacts().size() << "\n";
    out.stream() << "time_reversal_symmetric," << (model.all_real() ? "true" : "false") << "\n";
    return 0;
}

int cmd_bands(const RunConfig& cfg, const CliOverrides& cli) {
    Output out(cli.out_path);
    out.stream() << "lead,band_lo,band_hi\n";
    for (const auto& lead : cfg.model.leads()) {
        auto [lo, hi] = band(lead);
        out.stream() << csv_row({std::to_string(lead.id), format_double(lo), format_double(hi)});
    }
    return 0;
}

int cmd_tmatrix(const RunConfig& cfg, const CliOverrides& cli) {
    if (!cfg.grid_set) throw validation_error({"tmatrix: grid required (config.grid or --grid)"});
    std::vector<double> energies(static_cast<std::size_t>(cfg.grid_points));
    for (int i = 0; i < cfg.grid_points; ++i)
        energies[static_cast<std::size_t>(i)] =
            cfg.grid_points == 1
                ? 0.5 * (cfg.grid_lo + cfg.grid_hi)
                : cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * i / (cfg.grid_points - 1.0);

    const auto sub = coupling_subspace(cfg.model);
    const auto rows = kernels::tmatrix_sweep(cfg.model, sub, energies, cfg.tolerances);

    Output out(cli.out_path);
    std::vector<std::string> header{"E"};
    std::vector<std::pair<int, int>> pairs;
    for (const auto& a : cfg.model.leads())
        for (const auto& b : cfg.model.leads()) {
            pairs.emplace_back(a.id, b.id);
            const std::string tag = std::to_string(a.id) + "_" + std::to_string(b.id);
            header.push_back("ReT_" + tag);
            header.push_back("ImT_" + tag);
            header.push_back("AbsS2_" + tag);
        }
    out.stream() << csv_row(header);

    bool any_open = false;
    for (const auto& row : rows) {
        if (row.warning) std::cerr << render_warning(*row.warning) << "\n";
        if (!row.t) continue;
        any_open = true;
        const auto& t = *row.t;
        const SMatrix s = s_matrix(t, cfg.tolerances);
        std::vector<std::string> fields{format_double(row.energy)};
        for (const auto& [j, k] : pairs) {
            int cj = -1, ck = -1;
            for (std::size_t i = 0; i < t.channels.size(); ++i) {
                if (t.channels[i] == j) cj = static_cast<int>(i);
                if (t.channels[i] == k) ck = static_cast<int>(i);
            }
            if (cj < 0 || ck < 0) {
                fields.push_back("nan");
                fields.push_back("nan");
                fields.push_back("nan");
            } else {
                fields.push_back(format_double(t.entries(cj, ck).real()));
                fields.push_back(format_double(t.entries(cj, ck).imag()));
                fields.push_back(format_double(std::norm(s.entries(cj, ck))));
            }
        }
        out.stream() << csv_row(fields);
    }
    if (!any_open)
        std::cerr << render_warning(Warning{"no_open_channels", {{"grid", cli.grid.empty() ? "config" : cli.grid}}})
                  << "\n";
    return 0;
}

int cmd_currents(const RunConfig& cfg, const CliOverrides& cli) {
    const auto& states = require_states(cfg);
    const auto result = compute_transport(cfg.model, states, cfg.tolerances, cfg.quadrature);
    Output out(cli.out_path);
    out.stream() << "lead,beta,mu,charge_current,energy_current,particle_current\n";
    for (std::size_t i = 0; i < result.lead_ids.size(); ++i)
        out.stream() << csv_row({std::to_string(result.lead_ids[i]), format_double(states[i].beta),
                                 format_double(states[i].mu),
                                 format_double(result.charge_current[static_cast<Eigen::Index>(i)]),
                                 format_double(result.energy_current[static_cast<Eigen::Index>(i)]),
                                 format_double(result.particle_current[static_cast<Eigen::Index>(i)])});
    out.stream() << csv_row({"sigma", format_double(result.entropy.from_currents),
                             format_double(result.entropy.direct),
                             format_double(result.entropy.symmetrized),
                             std::to_string(result.quadrature.node_count),
                             format_double(result.quadrature.estimated_error)});
    print_warnings(std::cerr, result.quadrature.warnings);
    return 0;
}

int cmd_entropy(const RunConfig& cfg, const CliOverrides& cli) {
    const auto& states = require_states(cfg);
    const auto result = compute_transport(cfg.model, states, cfg.tolerances, cfg.quadrature);
    const auto verdict = positivity_verdict(result, cfg.model, states, cfg.tolerances);

    Output out(cli.out_path);
    out.stream() << "key,value\n";
    out.stream() << csv_row({"sigma_from_currents", format_double(result.entropy.from_currents)});
    out.stream() << csv_row({"sigma_direct", format_double(result.entropy.direct)});
    out.stream() << csv_row({"sigma_symmetrized", format_double(result.entropy.symmetrized)});
    out.stream() << csv_row({"max_route_deviation", format_double(result.entropy.max_deviation)});
    std::string channels;
    for (const auto& [k, j] : verdict.nontrivial_channels) {
        if (!channels.empty()) channels += ';';
        channels += std::to_string(k) + ">" + std::to_string(j);
    }
    out.stream() << csv_row({"nontrivial_channels", channels});
    std::string biased;
    for (const auto& [a, b] : verdict.biased_pairs) {
        if (!biased.empty()) biased += ';';
        biased += std::to_string(a) + "|" + std::to_string(b);
    }
    out.stream() << csv_row({"biased_pairs", biased});
    out.stream() << csv_row(
        {"predicted_strict_positive", verdict.predicted_strict_positive ? "true" : "false"});
    out.stream() << csv_row({"sigma", format_double(verdict.sigma)});
    out.stream() << csv_row({"positivity_satisfied", verdict.satisfied ? "true" : "false"});
    print_warnings(std::cerr, result.quadrature.warnings);
    return verdict.satisfied ? 0 : 3;
}

int cmd_verify(const RunConfig& cfg, const CliOverrides& cli) {
    Output out(cli.out_path);
    out.stream() << "check,value,threshold,status\n";
    bool all_ok = true;
    auto report = [&](const std::string& name, double value, double threshold, bool ok) {
        all_ok = all_ok && ok;
        out.stream() << csv_row({name, format_double(value), format_double(threshold),
                                 ok ? "pass" : "FAIL"});
    };

    const auto sub = coupling_subspace(cfg.model);
    const auto& tol = cfg.tolerances;

    // Scattering residuals on a fixed interior grid per open interval.
    double opt_max = 0.0, norm_max = 0.0, rowcol_max = 0.0, unit_max = 0.0, recip_max = 0.0;
    std::vector<double> grid;
    {
        std::vector<double> edges;
        for (const auto& lead : cfg.model.leads()) {
            auto [lo, hi] = band(lead);
            edges.push_back(lo);
            edges.push_back(hi);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            for (int g = 0; g < 25; ++g)
                grid.push_back(edges[i] + (edges[i + 1] - edges[i]) * (g + 0.5) / 25.0);
    }
    const auto rows = kernels::tmatrix_sweep(cfg.model, sub, grid, tol);
    long usable = 0;
    for (const auto& row : rows) {
        if (!row.t) continue;
        ++usable;
        const auto res = scattering_residuals(*row.t);
        opt_max = std::max(opt_max, res.optical);
        norm_max = std::max(norm_max, res.normality);
        rowcol_max = std::max(rowcol_max, res.rowcol);
        const SMatrix s = s_matrix(*row.t, tol);
        unit_max = std::max(unit_max, s.unitarity_residual);
        if (cfg.model.lead_count() == 2 && row.t->channel_count() == 2)
            recip_max = std::max(recip_max, std::abs(std::abs(row.t->entries(0, 1)) -
                                                     std::abs(row.t->entries(1, 0))));
    }
    // a residual maximum over zero solves verifies nothing
    report("scattering_grid_coverage", static_cast<double>(usable), 1.0, usable >= 1);
    report("optical_residual_max", opt_max, tol.tol_scatter, opt_max <= tol.tol_scatter);
    report("normality_residual_max", norm_max, tol.tol_scatter, norm_max <= tol.tol_scatter);
    report("rowcol_residual_max", rowcol_max, tol.tol_scatter, rowcol_max <= tol.tol_scatter);
    report("unitarity_residual_max", unit_max, tol.tol_scatter, unit_max <= tol.tol_scatter);
    if (cfg.model.lead_count() == 2)
        report("two_lead_reciprocity", recip_max, 1e-10, recip_max <= 1e-10);

    // Sokhotski consistency on reproducible random compact vectors.
    {
        std::mt19937_64 rng(20240817);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double worst = 0.0;
        for (const auto& lead : cfg.model.leads()) {
            auto [lo, hi] = band(lead);
            for (int trial = 0; trial < 5; ++trial) {
                LeadVector f;
                const int support = 1 + static_cast<int>(unif(rng) * 5.0);
                f.amps.resize(support);
                for (int s = 0; s < support; ++s) {
                    f.sites.push_back(s + 1);
                    f.amps[s] = cdouble(unif(rng) - 0.5, unif(rng) - 0.5);
                }
                f.amps /= f.norm();
                const double e = lo + (hi - lo) * (0.02 + 0.96 * unif(rng));
                const cdouble r = lead_resolvent(lead, e, f, f);
                const double lhs = r.imag();
                const double rhs = pi * std::norm(generalized_fourier(lead, e, f));
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        }
        report("sokhotski_deviation_max", worst, 1e-10, worst <= 1e-10);
    }

    if (cfg.has_states()) {
        const auto result = compute_transport(cfg.model, cfg.states, tol, cfg.quadrature);
        const double j_scale = result.charge_current.cwiseAbs().maxCoeff();
        const double phi_scale = result.energy_current.cwiseAbs().maxCoeff();
        const double charge_thr = 10.0 * cfg.quadrature.tol_quad * std::max(j_scale, 1e-30);
        const double energy_thr = 10.0 * cfg.quadrature.tol_quad * std::max(phi_scale, 1e-30);
        report("charge_conservation", std::abs(result.sum_charge), charge_thr,
               std::abs(result.sum_charge) <= charge_thr);
        report("energy_conservation", std::abs(result.sum_energy), energy_thr,
               std::abs(result.sum_energy) <= energy_thr);

        const double route_thr = 10.0 * cfg.quadrature.tol_quad;
        const double dev_ab = std::abs(result.entropy.from_currents - result.entropy.direct);
        report("entropy_route_ab", dev_ab, route_thr, dev_ab <= route_thr);
        if (cfg.model.all_real()) {
            const double dev_cb = std::abs(result.entropy.symmetrized - result.entropy.direct);
            report("entropy_route_cb", dev_cb, route_thr, dev_cb <= route_thr);
        }
        const double sigma_floor = -1e-12 * std::max(1.0, std::abs(result.entropy.direct));
        report("entropy_nonnegative", result.entropy.direct, sigma_floor,
               result.entropy.direct >= sigma_floor);
        const auto verdict = positivity_verdict(result, cfg.model, cfg.states, tol);
        if (verdict.predicted_strict_positive)
            report("entropy_strictly_positive", verdict.sigma, tol.positivity_floor,
                   verdict.sigma > tol.positivity_floor);
        print_warnings(std::cerr, result.quadrature.warnings);
    }

    return all_ok ? 0 : 3;
}

int cmd_quench(const RunConfig& cfg, const CliOverrides& cli) {
    const auto& states = require_states(cfg);
    const int length = cfg.lead_length;
    double t2 = cfg.window_hi, t1 = cfg.window_lo;
    if (!cfg.window_set) {
        t2 = echo_bound(cfg.model, length);
        t1 = 0.5 * t2;
    }
    const auto fin = build_finite(cfg.model, states, length, cfg.scatterer_occupation);
    const auto cmp =
        steady_compare(fin, cfg.model, states, t1, t2, cfg.samples, cfg.tolerances, cfg.quadrature);
    const auto& series = cmp.series;

    Output out(cli.out_path);
    std::vector<std::string> header{"t"};
    for (int id : fin.lead_ids()) {
        header.push_back("j_" + std::to_string(id));
        header.push_back("phi_" + std::to_string(id));
    }
    out.stream() << csv_row(header);
    for (const auto& s : series) {
        std::vector<std::string> fields{format_double(s.time)};
        for (Eigen::Index k = 0; k < s.charge.size(); ++k) {
            fields.push_back(format_double(s.charge[k]));
            fields.push_back(format_double(s.energy[k]));
        }
        out.stream() << csv_row(fields);
    }

    nlohmann::json summary;
    summary["window"] = {cmp.window_lo, cmp.window_hi};
    summary["samples"] = cmp.samples;
    summary["echo_bound"] = cmp.echo_bound;
    summary["lead_length"] = length;
    summary["bound_state_warning"] = cmp.bound_state_warning;
    summary["bound_states"] = cmp.bound_states;
    nlohmann::json leads = nlohmann::json::array();
    for (const auto& row : cmp.leads) {
        nlohmann::json jl;
        jl["lead"] = row.lead_id;
        jl["mean_charge"] = row.mean_charge;
        jl["mean_energy"] = row.mean_energy;
        jl["band_charge"] = row.band_charge;
        jl["band_energy"] = row.band_energy;
        jl["lb_charge"] = row.lb_charge;
        jl["lb_energy"] = row.lb_energy;
        jl["rel_dev_charge"] = row.rel_dev_charge;
        jl["rel_dev_energy"] = row.rel_dev_energy;
        leads.push_back(jl);
    }
    summary["leads"] = leads;
    out.stream() << "# summary " << summary.dump() << "\n";

    if (cmp.bound_state_warning) {
        std::string list;
        for (double b : cmp.bound_states) {
            if (!list.empty()) list += ';';
            list += format_double(b);
        }
        std::cerr << render_warning(Warning{"bound_states",
                                            {{"count", std::to_string(cmp.bound_states.size())},
                                             {"energies", list}}})
                  << "\n";
    }
    print_warnings(std::cerr, cmp.lb_quadrature.warnings);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-terminal quantum transport on tight-binding leads"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::vector<CLI::App*> subs;
    for (const char* name : {"validate", "bands", "tmatrix", "currents", "entropy", "verify", "quench"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", cli.config_path, "run configuration file")->required();
        sub->add_option("--out", cli.out_path, "output CSV path (default: stdout)");
        sub->add_option("--tol-quad", cli.tol_quad, "quadrature tolerance override");
        sub->add_option("--lead-length", cli.lead_length, "quench lead truncation length");
        sub->add_option("--samples", cli.samples, "quench window samples");
        sub->add_option("--grid", cli.grid, "energy grid a:b:n");
        sub->add_option("--window", cli.window, "quench window T1:T2");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (command == "validate") return cmd_validate(cli);
        RunConfig cfg = load_config(cli.config_path);
        apply_overrides(cfg, cli);
        std::cerr << describe_defaults(cfg) << "\n";
        if (command == "bands") return cmd_bands(cfg, cli);
        if (command == "tmatrix") return cmd_tmatrix(cfg, cli);
        if (command == "currents") return cmd_currents(cfg, cli);
        if (command == "entropy") return cmd_entropy(cfg, cli);
        if (command == "verify") return cmd_verify(cfg, cli);
        if (command == "quench") return cmd_quench(cfg, cli);
        std::cerr << "unknown command: " << command << "\n";
        return 1;
    } catch (const validation_error& e) {
        for (const auto& v : e.violations) std::cerr << "ERROR: " << v << "\n";
        return 1;
    } catch (const quadrature_error& e) {
        std::cerr << "ERROR: " << e.what() << "\n";
        return 2;
    } catch (const near_singular& e) {
        std::cerr << "ERROR: " << e.what() << "\n";
        return 2;
    } catch (const exceptional_energy& e) {
        std::cerr << "ERROR: " << e.what() << "\n";
        return 2;
    } catch (const channel_closed& e) {
        std::cerr << "ERROR: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ERROR: " << e.what() << "\n";
        return 2;
    }
}
