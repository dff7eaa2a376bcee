#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fbf/laminate_constructor.hpp"

namespace fbf {

enum class TimeProfile { Linear, Quadratic, Cubic, QuarterSine };

std::string to_string(TimeProfile p);

/// phi(x, t) = cos(mode pi x / L) * Theta(s) with s = (t - t_start) /
/// (horizon - t_start); every profile has Theta(1) = 0.
struct TestFunction {
    int mode = 0;
    TimeProfile profile = TimeProfile::Linear;
    double t_start = 0.0;
    double horizon = 1.0;

    double theta(double t) const;
    double theta_dt(double t) const;
};

/// Modes 0..max_mode crossed with the four profiles.
std::vector<TestFunction> catalog(int max_mode, double t_start, double horizon);

using FluxFn = std::function<double(double)>;

/// Time quadrature of the weak functional. Trapezoid weights both terms
/// symmetrically. StepConsistent pairs the left slice with the increment of
/// Theta and the right slice with the flux term, which is the summation-by-
/// parts dual of implicit Euler: the functional of an implicit solver run
/// then carries only its spatial error.
enum class TimeQuadrature { Trapezoid, StepConsistent };

/// Concatenation of histories that share their boundary slices; the first
/// slice of every part after the first is skipped.
class GluedHistory : public DensityHistory {
public:
    void add(const DensityHistory* part);
    double length() const override { return parts_.front()->length(); }
    std::size_t slices() const override { return index_.size(); }
    double time(std::size_t n) const override;
    PiecewiseSlice density(std::size_t n) const override;

private:
    std::vector<const DensityHistory*> parts_;
    std::vector<std::pair<std::size_t, std::size_t>> index_;
};

/// Weak-form functional of u on the slice window [n_begin, n_end]:
/// int int (u phi_t + flux(u) phi_xx) + int u phi at n_begin - int u phi at n_end,
/// integrated exactly in x on the history's own nodes and by the selected
/// quadrature over its slice times.
double weak_functional(const DensityHistory& u, const TestFunction& tf, const FluxFn& flux,
                       std::size_t n_begin, std::size_t n_end,
                       TimeQuadrature rule = TimeQuadrature::StepConsistent);

/// Full residual with the initial term taken from u0. Throws
/// std::invalid_argument when the history does not span the test function's
/// time interval.
double weak_residual(const DensityHistory& u, const PiecewiseSlice& u0, const TestFunction& tf,
                     const FluxFn& flux, TimeQuadrature rule = TimeQuadrature::StepConsistent);

struct ResidualEntry {
    int mode = 0;
    TimeProfile profile = TimeProfile::Linear;
    double value = 0.0;
};

/// Residuals of the whole catalog, sharing one pass over the slices.
std::vector<ResidualEntry> catalog_residuals(const DensityHistory& u, const FluxFn& flux,
                                             int max_mode,
                                             TimeQuadrature rule = TimeQuadrature::StepConsistent);

double worst_residual(const std::vector<ResidualEntry>& r);

struct CheckItem {
    std::string name;
    bool pass = true;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerificationReport {
    std::string case_label;
    std::vector<ResidualEntry> residuals;
    double worst_residual = 0.0;
    double baseline_residual = 0.0;
    double conservation_error = 0.0;
    std::vector<CheckItem> items;
    std::vector<double> two_point_distance_trace;
    int catalog_modes = 0;

    bool pass() const;
    void add(CheckItem item) { items.push_back(std::move(item)); }
};

/// Largest per-slice |int u dx - expected_mass|.
double conservation_error(const DensityHistory& u, double expected_mass);

/// max over laminated intervals of the distance from u to {s-(r0), s+(r0)}.
double two_point_distance(const LaminateSolution& s, double r0);

/// What verify_conclusions needs to know about a run; optional parts are
/// null when the case has no Q.
struct ConclusionInputs {
    std::string case_label;
    const DensityHistory* u = nullptr;
    double expected_mass = 0.0;
    FluxFn flux;
    int max_mode = 8;
    TimeQuadrature rule = TimeQuadrature::StepConsistent;
    double baseline_residual = 0.0;
    const SubsolutionFields* fields = nullptr;
    const LaminateSolution* laminate = nullptr;
    double delta = 0.0;
    double d0 = 0.0;
    /// Per-epoch two-point distances, case (iv) only.
    std::vector<double> epoch_distances;
};

/// Case-specific checklist: conservation per slice, band membership outside
/// transition layers, dyadic oscillation floor, and for case (iv) a strictly
/// decreasing tail-maximum of the two-point distance.
VerificationReport verify_conclusions(const ConclusionInputs& in);

}  // namespace fbf
