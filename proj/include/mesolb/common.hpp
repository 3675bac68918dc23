#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace mesolb {

using cdouble = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Numerical knobs shared across the solver. All of them are overridable from
// the CLI and the run config.
struct Tolerances {
    double tol_scatter = 1e-9;     // ceiling for optical/unitarity/normality residuals
    double tol_pole = 1e-8;        // relative exclusion radius around scatterer eigenvalues
    double cond_max = 1e12;        // condition ceiling before a T-matrix solve is flagged
    double tol_quad = 1e-8;        // absolute quadrature target per integral component
    double channel_floor = 1e-10;  // integrated |T|^2 below which a channel counts as trivial
    double positivity_floor = 1e-12;
};

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model description failed validation; `violations` lists every offence found.
struct validation_error : error {
    std::vector<std::string> violations;
    explicit validation_error(std::vector<std::string> v);
};

// Energy outside the open band of a lead where an open channel is required.
struct channel_closed : error {
    double energy;
    channel_closed(const std::string& what, double e) : error(what), energy(e) {}
};

// Band edge or scatterer eigenvalue: member of the excluded discrete set.
struct exceptional_energy : error {
    double energy;
    exceptional_energy(const std::string& what, double e) : error(what), energy(e) {}
};

// Linear system condition number above cond_max at this energy.
struct near_singular : error {
    double energy;
    double condition;
    near_singular(const std::string& what, double e, double c)
        : error(what), energy(e), condition(c) {}
};

// Adaptive refinement ran out of depth; carries the worst subinterval.
struct quadrature_error : error {
    double lo, hi;
    quadrature_error(const std::string& what, double a, double b) : error(what), lo(a), hi(b) {}
};

// Machine-parsable warning, rendered as "WARN: key=value key=value ...".
struct Warning {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> fields;
};

using WarningLog = std::vector<Warning>;

}  // namespace mesolb
