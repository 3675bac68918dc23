#include "mesolb/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mesolb/textio.hpp"

namespace mesolb {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw validation_error({what}); }

double number_at(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where + ": expected a number");
    return j.get<double>();
}

int integer_at(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where + ": expected an integer");
    return j.get<int>();
}

// Complex numbers are explicit [re, im] pairs; nothing is inferred.
cdouble complex_at(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) fail(where + ": expected a [re, im] pair");
    return {number_at(j[0], where + "[0]"), number_at(j[1], where + "[1]")};
}

Eigen::VectorXcd complex_vector_at(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where + ": expected an array of [re, im] pairs");
    Eigen::VectorXcd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = complex_at(j[i], where + "[" + std::to_string(i) + "]");
    return v;
}

LeadVector lead_vector_at(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where + ": expected an object mapping site -> [re, im]");
    LeadVector v;
    std::vector<std::pair<int, cdouble>> entries;
    for (const auto& [key, value] : j.items()) {
        int site = 0;
        try {
            site = std::stoi(key);
        } catch (...) {
            fail(where + ": site key '" + key + "' is not an integer");
        }
        entries.emplace_back(site, complex_at(value, where + "." + key));
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    v.amps.resize(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        v.sites.push_back(entries[i].first);
        v.amps[static_cast<Eigen::Index>(i)] = entries[i].second;
    }
    return v;
}

ModelSpec model_spec_from_json(const json& j) {
    if (!j.is_object()) fail("model: expected an object");
    ModelSpec spec;

    if (!j.contains("scatterer")) fail("model.scatterer: missing");
    const auto& sc = j["scatterer"];
    if (!sc.is_array() || sc.empty()) fail("model.scatterer: expected a non-empty matrix");
    const auto rows = sc.size();
    spec.scatterer.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& row = sc[r];
        if (!row.is_array() || row.size() != rows) fail("model.scatterer: matrix must be square");
        for (std::size_t c = 0; c < rows; ++c)
            spec.scatterer(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                complex_at(row[c], "model.scatterer[" + std::to_string(r) + "][" +
                                       std::to_string(c) + "]");
    }

    if (!j.contains("leads") || !j["leads"].is_array()) fail("model.leads: missing or not an array");
    for (std::size_t i = 0; i < j["leads"].size(); ++i) {
        const auto& jl = j["leads"][i];
        const std::string where = "model.leads[" + std::to_string(i) + "]";
        LeadSpec lead;
        lead.id = integer_at(jl.value("id", json()), where + ".id");
        lead.onsite = number_at(jl.value("onsite", json()), where + ".onsite");
        lead.hopping = number_at(jl.value("hopping", json()), where + ".hopping");
        spec.leads.push_back(lead);
    }

    for (std::size_t i = 0; j.contains("couplings") && i < j["couplings"].size(); ++i) {
        const auto& jc = j["couplings"][i];
        const std::string where = "model.couplings[" + std::to_string(i) + "]";
        CouplingTerm c;
        c.lead = integer_at(jc.value("lead", json()), where + ".lead");
        c.strength = number_at(jc.value("strength", json()), where + ".strength");
        if (!jc.contains("scatterer_vector")) fail(where + ".scatterer_vector: missing");
        c.scatterer_vector = complex_vector_at(jc["scatterer_vector"], where + ".scatterer_vector");
        if (!jc.contains("lead_vector")) fail(where + ".lead_vector: missing");
        c.lead_vector = lead_vector_at(jc["lead_vector"], where + ".lead_vector");
        spec.couplings.push_back(std::move(c));
    }

    for (std::size_t i = 0; j.contains("contacts") && i < j["contacts"].size(); ++i) {
        const auto& jc = j["contacts"][i];
        const std::string where = "model.contacts[" + std::to_string(i) + "]";
        DirectContactTerm c;
        if (!jc.contains("leads") || !jc["leads"].is_array() || jc["leads"].size() != 2)
            fail(where + ".leads: expected [j, k]");
        c.lead_j = integer_at(jc["leads"][0], where + ".leads[0]");
        c.lead_k = integer_at(jc["leads"][1], where + ".leads[1]");
        c.strength = number_at(jc.value("strength", json()), where + ".strength");
        if (!jc.contains("vector_j")) fail(where + ".vector_j: missing");
        c.vector_j = lead_vector_at(jc["vector_j"], where + ".vector_j");
        if (!jc.contains("vector_k")) fail(where + ".vector_k: missing");
        c.vector_k = lead_vector_at(jc["vector_k"], where + ".vector_k");
        spec.contacts.push_back(std::move(c));
    }

    if (j.contains("charge")) spec.charge = number_at(j["charge"], "model.charge");
    return spec;
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail("parse error in " + path + ": " + e.what());
    }
}

}  // namespace

ModelSpec load_model_spec(const std::string& path) { return model_spec_from_json(parse_file(path)); }

ModelSpec model_spec_from_config(const std::string& config_path) {
    const json j = parse_file(config_path);
    if (!j.is_object() || !j.contains("model")) fail("config.model: missing");
    if (j["model"].is_string()) {
        namespace fs = std::filesystem;
        fs::path model_path = j["model"].get<std::string>();
        if (model_path.is_relative()) model_path = fs::path(config_path).parent_path() / model_path;
        return model_spec_from_json(parse_file(model_path.string()));
    }
    return model_spec_from_json(j["model"]);
}

RunConfig load_config(const std::string& path) {
    const json j = parse_file(path);
    if (!j.is_object()) fail("config: expected a JSON object");

    json model_json;
    if (!j.contains("model")) fail("config.model: missing");
    if (j["model"].is_string()) {
        namespace fs = std::filesystem;
        fs::path model_path = j["model"].get<std::string>();
        if (model_path.is_relative()) model_path = fs::path(path).parent_path() / model_path;
        model_json = parse_file(model_path.string());
    } else {
        model_json = j["model"];
    }

    RunConfig cfg;
    cfg.model = validate_model(model_spec_from_json(model_json));

    if (j.contains("reservoirs")) {
        if (!j["reservoirs"].is_array()) fail("config.reservoirs: expected an array");
        cfg.states.assign(static_cast<std::size_t>(cfg.model.lead_count()), ReservoirState{});
        std::vector<bool> seen(static_cast<std::size_t>(cfg.model.lead_count()), false);
        for (std::size_t i = 0; i < j["reservoirs"].size(); ++i) {
            const auto& jr = j["reservoirs"][i];
            const std::string where = "config.reservoirs[" + std::to_string(i) + "]";
            const int lead = integer_at(jr.value("lead", json()), where + ".lead");
            const int pos = cfg.model.lead_index(lead);
            if (pos < 0) fail(where + ".lead: unknown lead id " + std::to_string(lead));
            if (seen[static_cast<std::size_t>(pos)])
                fail(where + ".lead: duplicate state for lead " + std::to_string(lead));
            seen[static_cast<std::size_t>(pos)] = true;
            ReservoirState state;
            state.beta = number_at(jr.value("beta", json()), where + ".beta");
            state.mu = number_at(jr.value("mu", json()), where + ".mu");
            if (!(state.beta > 0.0)) fail(where + ".beta: beta must be positive");
            cfg.states[static_cast<std::size_t>(pos)] = state;
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                fail("config.reservoirs: missing state for lead " +
                     std::to_string(cfg.model.leads()[i].id));
    }

    if (j.contains("tolerances")) {
        const auto& jt = j["tolerances"];
        auto opt_num = [&](const char* key, double& slot) {
            if (jt.contains(key)) {
                slot = number_at(jt[key], std::string("config.tolerances.") + key);
                if (!(slot > 0.0)) fail(std::string("config.tolerances.") + key + ": must be positive");
            }
        };
        opt_num("tol_quad", cfg.tolerances.tol_quad);
        opt_num("tol_scatter", cfg.tolerances.tol_scatter);
        opt_num("tol_pole", cfg.tolerances.tol_pole);
        opt_num("cond_max", cfg.tolerances.cond_max);
        opt_num("channel_floor", cfg.tolerances.channel_floor);
        opt_num("positivity_floor", cfg.tolerances.positivity_floor);
    }
    cfg.quadrature.tol_quad = cfg.tolerances.tol_quad;

    if (j.contains("grid")) {
        const auto& jg = j["grid"];
        cfg.grid_lo = number_at(jg.value("lo", json()), "config.grid.lo");
        cfg.grid_hi = number_at(jg.value("hi", json()), "config.grid.hi");
        cfg.grid_points = integer_at(jg.value("points", json()), "config.grid.points");
        if (!(cfg.grid_lo < cfg.grid_hi)) fail("config.grid: lo must be below hi");
        if (cfg.grid_points < 1) fail("config.grid.points: must be positive");
        cfg.grid_set = true;
    }

    if (j.contains("quench")) {
        const auto& jq = j["quench"];
        if (jq.contains("lead_length"))
            cfg.lead_length = integer_at(jq["lead_length"], "config.quench.lead_length");
        if (cfg.lead_length < 1) fail("config.quench.lead_length: must be positive");
        if (jq.contains("window")) {
            const auto& jw = jq["window"];
            if (!jw.is_array() || jw.size() != 2) fail("config.quench.window: expected [T1, T2]");
            cfg.window_lo = number_at(jw[0], "config.quench.window[0]");
            cfg.window_hi = number_at(jw[1], "config.quench.window[1]");
            if (!(cfg.window_lo < cfg.window_hi)) fail("config.quench.window: T1 must be below T2");
            cfg.window_set = true;
        }
        if (jq.contains("samples"))
            cfg.samples = integer_at(jq["samples"], "config.quench.samples");
        if (cfg.samples < 2) fail("config.quench.samples: must be at least 2");
        if (jq.contains("scatterer_occupation")) {
            cfg.scatterer_occupation =
                number_at(jq["scatterer_occupation"], "config.quench.scatterer_occupation");
            if (cfg.scatterer_occupation < 0.0 || cfg.scatterer_occupation > 1.0)
                fail("config.quench.scatterer_occupation: must lie in [0, 1]");
        }
    }

    if (j.contains("bound_search")) {
        const auto& jb = j["bound_search"];
        if (jb.contains("window")) {
            const auto& jw = jb["window"];
            if (!jw.is_array() || jw.size() != 2) fail("config.bound_search.window: expected [lo, hi]");
            cfg.bound_window = std::make_pair(number_at(jw[0], "config.bound_search.window[0]"),
                                              number_at(jw[1], "config.bound_search.window[1]"));
        }
        if (jb.contains("grid"))
            cfg.bound_grid = integer_at(jb["grid"], "config.bound_search.grid");
        if (cfg.bound_grid < 2) fail("config.bound_search.grid: must be at least 2");
    }

    return cfg;
}

std::string describe_defaults(const RunConfig& cfg) {
    std::string line = "INFO: tol_quad=" + format_double(cfg.tolerances.tol_quad);
    line += " tol_scatter=" + format_double(cfg.tolerances.tol_scatter);
    line += " tol_pole=" + format_double(cfg.tolerances.tol_pole);
    line += " cond_max=" + format_double(cfg.tolerances.cond_max);
    line += " channel_floor=" + format_double(cfg.tolerances.channel_floor);
    line += " positivity_floor=" + format_double(cfg.tolerances.positivity_floor);
    line += " lead_length=" + std::to_string(cfg.lead_length);
    line += " samples=" + std::to_string(cfg.samples);
    line += " scatterer_occupation=" + format_double(cfg.scatterer_occupation);
    return line;
}

}  // namespace mesolb
