#pragma once

#include <optional>
#include <string>

#include "mesolb/model.hpp"
#include "mesolb/transport.hpp"

namespace mesolb {

// Command-independent run description loaded from a JSON config. The model
// may be given inline or as a path (resolved relative to the config file).
struct RunConfig {
    SystemModel model;
    std::vector<ReservoirState> states;  // leads() order; empty when absent
    Tolerances tolerances;
    QuadratureOptions quadrature;

    // tmatrix sweep grid
    double grid_lo = 0.0, grid_hi = 0.0;
    int grid_points = 0;
    bool grid_set = false;

    // quench parameters
    int lead_length = 600;
    double window_lo = 0.0, window_hi = 0.0;
    bool window_set = false;
    int samples = 201;
    double scatterer_occupation = 0.0;

    // bound-state search
    std::optional<std::pair<double, double>> bound_window;
    int bound_grid = 600;

    bool has_states() const { return !states.empty(); }
};

// Parses and validates; throws validation_error with field context on any
// problem (parse errors, unknown lead ids, non-positive beta, ...).
RunConfig load_config(const std::string& path);

// Parse only the model section of a config file (no reservoirs required).
ModelSpec load_model_spec(const std::string& path);

// Extract the (unvalidated) model description from a run config, following
// a model path if present.
ModelSpec model_spec_from_config(const std::string& config_path);

// Defaults actually in effect, echoed to the run log.
std::string describe_defaults(const RunConfig& cfg);

}  // namespace mesolb
