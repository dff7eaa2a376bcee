#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbf/field.hpp"
#include "fbf/modified_flux.hpp"

namespace fbf {

class CflError : public std::runtime_error {
public:
    CflError(const std::string& what, double required_dt)
        : std::runtime_error(what), required_dt(required_dt) {}
    double required_dt;
};

class TimeoutError : public std::runtime_error {
public:
    TimeoutError(const std::string& what, double closest_gap)
        : std::runtime_error(what), closest_gap(closest_gap) {}
    double closest_gap;
};

enum class TimeScheme { ImplicitEuler, ExplicitEuler };

/// Step sizes grow geometrically from dt_first by `growth` up to dt_max,
/// so early times are resolved finely and long horizons stay cheap. Every
/// step is stored.
struct StepPolicy {
    TimeScheme scheme = TimeScheme::ImplicitEuler;
    double dt_first = 1e-5;
    double growth = 1.05;
    double dt_max = 0.05;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
};

struct SolverDiagnostics {
    double mean = 0.0;
    std::vector<double> mass_trace;
    std::vector<double> min_trace;
    std::vector<double> max_trace;
    std::vector<double> decay_trace;
    /// Smallest slope of rho* over the observed density range.
    double s_lower = 0.0;
    double fitted_decay_rate = 0.0;
    int max_newton_iterations = 0;
    int rejected_steps = 0;
};

struct SolveResult {
    SpaceTimeField field;
    SolverDiagnostics diagnostics;
    TimeScheme scheme = TimeScheme::ImplicitEuler;
};

/// Throws std::invalid_argument unless u0 lies in [0,1] and its one-sided
/// differences at both ends are within 1e-8 * h.
void check_initial_datum(const Grid& g, const std::vector<double>& u0);

/// Size and [0,1] range check only.
void check_density_range(const Grid& g, const std::vector<double>& u);

/// Conservative finite-volume evolution of u_t = (rho*(u))_xx with zero
/// boundary flux from t_start to t_end.
SolveResult solve(const ModifiedFlux& m, const Grid& g, const std::vector<double>& u0,
                  double t_end, const StepPolicy& policy = {}, double t_start = 0.0);

/// Restarts from a stored slice of an earlier run. Only the range is
/// checked: an evolved slice meets the end compatibility to O(h^2) only.
SolveResult continue_solve(const ModifiedFlux& m, const Grid& g, const std::vector<double>& slice,
                           double t_start, double t_end, const StepPolicy& policy = {});

/// A stopping rule on the current slice. `gap` is optional; when given, it
/// should be <= 0 exactly when `holds` is true and is used to report the
/// closest approach on timeout.
struct SliceCondition {
    std::function<bool(const std::vector<double>&)> holds;
    std::function<double(const std::vector<double>&)> gap;
    std::string description;
};

struct ConditionResult {
    SolveResult run;
    double t_hit = 0.0;
};

/// Evolves until the condition first holds on a stored slice. The default
/// max_time (<= 0) is 50 L^2 / theta0, measured from t_start.
ConditionResult run_until_condition(const ModifiedFlux& m, const Grid& g,
                                    const std::vector<double>& u0, const SliceCondition& cond,
                                    const StepPolicy& policy = {}, double max_time = 0.0,
                                    double t_start = 0.0);

/// Least-squares slope of -log(decay) against t over the trailing fraction
/// of the samples with decay above `floor`.
double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& decay,
                      double trailing_fraction = 0.5, double floor = 1e-13);

/// Smallest nonzero eigenvalue of the discrete Neumann Laplacian.
double discrete_poincare_constant(const Grid& g);

/// Recomputes mass/min/max/decay traces for a field.
SolverDiagnostics diagnose(const SpaceTimeField& f, const ModifiedFlux& m);

}  // namespace fbf
