#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fbf/initial_data.hpp"
#include "fbf/weak_form_verifier.hpp"

namespace fbf {

/// The five initial-datum cases. Labels print as "i", "ii-1", "ii-2", "iii"
/// and "iv".
enum class ScenarioCase {
    NoBackward,     ///< data stay on one forward branch
    LowMeanDirect,  ///< mean below s2-, peak reaches the backward range
    LowMeanStaged,  ///< type II with s2- <= mean < s0-
    HighMean,       ///< mean above s0+, trough reaches it
    BackwardMean,   ///< mean inside [s0-, s0+]
};

std::string to_string(ScenarioCase c);
/// Inverse of to_string; throws std::invalid_argument on an unknown label.
ScenarioCase parse_case(const std::string& label);

struct LaminateSettings {
    /// Strip width is h / strip_divisor.
    int strip_divisor = 2;
    double eps = 0.0;  ///< zero selects 5 delta d0
    std::vector<std::uint64_t> seeds{1, 2, 3};
    /// Laminate CSV dumps keep every csv_every-th slice plus the last one.
    int csv_every = 10;
};

struct EpochSettings {
    std::optional<double> r0;  ///< default: midpoint of (rho(s0+), r*)
    int count = 4;
    double length = 1.0;
    double c1 = 0.001;
    double c2 = 0.0008;
};

struct ScenarioInput {
    FluxParams params{0.9, 1.0};
    Grid grid{1.0, 200};
    InitialDatum datum = InitialDatum::bump(0.11, 0.45, 8);
    std::optional<ScenarioCase> case_override;
    /// Flux window for the laminated stage of cases ii-1, ii-2 and iii.
    std::optional<double> r1;
    std::optional<double> r2;
    StepPolicy policy{TimeScheme::ImplicitEuler, 1e-6, 1.03, 2e-3};
    /// Horizon of single-stage runs, and the length of the classical
    /// continuation in case ii-2.
    double t_end = 0.4;
    int catalog_modes = 8;
    bool build_laminates = true;
    LaminateSettings laminate;
    EpochSettings epochs;

    std::vector<double> sampled_datum() const { return datum.sample(grid); }
};

struct DatumStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

DatumStats datum_stats(const std::vector<double>& u0);

/// Case per the ordered tests: NoBackward if max < s0- or min > s0+;
/// BackwardMean if s0- <= mean <= s0+; below s0- the mean splits at s2-
/// (equality goes to the staged case, which needs type II); above s0+ it
/// is HighMean. Throws std::domain_error outside the FDBDF region.
ScenarioCase classify_case(const FluxParams& p, const DatumStats& s);
ScenarioCase classify_case(const ScenarioInput& inp);

struct FluxWindow {
    double r1 = 0.0;
    double r2 = 0.0;
};

/// Default window for the laminated stage of a case with a window.
FluxWindow default_window(const FluxParams& p, ScenarioCase c, double mean);

struct EpochPlan {
    double r0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    /// First time the datum evolved under the first window sits strictly
    /// between s-(r0) and s+(r0).
    double t_hit = 0.0;
    /// Epoch k runs over [ends[k-2], ends[k-1]] with ends[-1] = 0 implied;
    /// ends[0] = T1 = max(t_hit, length) and ends[j] = T1 + j * length.
    std::vector<double> ends;
    std::vector<FluxWindow> windows;

    double start_of(std::size_t k) const { return k == 0 ? 0.0 : ends[k - 1]; }
};

/// Harmonic windows r0 - c1/k, r0 + c2/k, with c1 and c2 shrunk when needed
/// so that every window lies inside (rho(s0+), r*). Throws
/// std::invalid_argument when r0 is outside that range or n_epochs < 2.
EpochPlan plan_epochs(const ScenarioInput& inp, double r0, int n_epochs);

/// One solver stage and everything built on it. Laminates refer to *fields,
/// so a stage is kept behind a pointer once built.
struct Stage {
    std::string name;
    ModifiedFlux flux;
    std::optional<WallSpec> walls;
    SolveResult run;
    std::unique_ptr<SubsolutionFields> fields;
    QSummary q;
    SubsolutionReport strict;
    std::vector<LaminateSolution> laminates;
    std::unique_ptr<FieldHistory> classical;
    double delta = 0.0;
    double baseline_residual = 0.0;

    double t_begin() const { return run.field.times.front(); }
    double t_end() const { return run.field.times.back(); }
};

struct ScenarioBundle {
    ScenarioInput input;
    ScenarioCase label = ScenarioCase::NoBackward;
    DatumStats stats;
    CriticalData crit;
    double initial_mass = 0.0;
    std::vector<std::unique_ptr<Stage>> stages;
    std::optional<EpochPlan> plan;
    /// Whole-horizon histories, one per seed (the classical history when no
    /// stage is laminated).
    std::vector<std::unique_ptr<GluedHistory>> histories;
    std::vector<double> worst_residuals;
    std::vector<double> epoch_distances;
    VerificationReport report;

    bool pass() const { return report.pass(); }
};

/// Runs the pipeline of the datum's case. Errors from the stages are
/// rethrown as std::runtime_error with the stage name prepended.
ScenarioBundle run_scenario(const ScenarioInput& inp);

}  // namespace fbf
