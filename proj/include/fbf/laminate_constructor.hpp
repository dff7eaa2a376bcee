#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fbf/inclusion_geometry.hpp"

namespace fbf {

/// Piecewise-constant density on one time slice: u[j] lives on
/// [x[j], x[j+1]].
struct PiecewiseSlice {
    std::vector<double> x;
    std::vector<double> u;
};

/// Read access shared by solver fields and laminates, so the weak-form
/// checks can treat both the same way.
class DensityHistory {
public:
    virtual ~DensityHistory() = default;
    virtual double length() const = 0;
    virtual std::size_t slices() const = 0;
    virtual double time(std::size_t n) const = 0;
    virtual PiecewiseSlice density(std::size_t n) const = 0;
};

/// Cell averages viewed as a piecewise-constant history.
class FieldHistory : public DensityHistory {
public:
    explicit FieldHistory(const SpaceTimeField& f) : field_(&f) {}
    double length() const override { return field_->grid.L; }
    std::size_t slices() const override { return field_->slices(); }
    double time(std::size_t n) const override { return field_->times[n]; }
    PiecewiseSlice density(std::size_t n) const override;

private:
    const SpaceTimeField* field_;
};

/// One laminated strip on one slice. The density is s_plus on the first
/// lambda-fraction of the strip when plus_first, s_minus otherwise, and the
/// complementary value on the rest.
struct StripState {
    std::int64_t index = 0;
    double lo = 0.0;
    double hi = 0.0;
    double lambda = 0.0;
    double level = 0.0;
    double s_plus = 0.0;
    double s_minus = 0.0;
    double w_lo = 0.0;
    double w_hi = 0.0;
    bool plus_first = true;

    double kink() const {
        return plus_first ? lo + lambda * (hi - lo) : lo + (1.0 - lambda) * (hi - lo);
    }
    double first_value() const { return plus_first ? s_plus : s_minus; }
    double second_value() const { return plus_first ? s_minus : s_plus; }
};

enum class IntervalKind : std::uint8_t { Exterior, Layer, Laminated };

/// Materialized slice on its own node set (coarse faces, strip edges, kinks).
/// v and w are nodal; u and kind are per interval.
struct LaminateSlice {
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> w;
    std::vector<double> u;
    std::vector<IntervalKind> kind;
    std::vector<std::uint8_t> in_q;
};

struct LaminateDefects {
    double sup_dev = 0.0;      ///< max over Q of |v - v*| and |w - w*|
    double sup_dev_v = 0.0;
    double sup_dev_w = 0.0;
    double wx_mismatch = 0.0;  ///< max over Q of |w_x - v|
    double band_violation_measure = 0.0;
    double layer_fraction = 0.0;
    double band_violation_outside_layers = 0.0;
    double boundary_mismatch = 0.0;  ///< max |z - z*| outside Q
    double minus_band_fraction = 0.0;
    double plus_band_fraction = 0.0;
    double max_mass_error = 0.0;      ///< per slice |int u - int u*|
    double max_total_mass_error = 0.0;
    /// Surrogate for the time-derivative bound: |d/dt of (v - v*)| after a box
    /// average of width 2 delta, at strip centres.
    double mollified_vt_deviation = 0.0;
    std::size_t laminated_strip_slices = 0;
    std::size_t layer_strip_fallbacks = 0;
    /// Strips whose clamped level left the admissible range for their slope
    /// and was moved to the middle of that range.
    std::size_t adjusted_levels = 0;
};

struct OscillationReport {
    std::size_t rectangles_tested = 0;
    double min_oscillation = 0.0;
    bool pass = true;
    double floor = 0.0;
};

class InfeasibleLaminateError : public std::runtime_error {
public:
    InfeasibleLaminateError(const std::string& what, double achievable)
        : std::runtime_error(what), achievable_sup_dev(achievable) {}
    double achievable_sup_dev;
};

struct LaminateOptions {
    double delta = 0.0;
    double eps = 0.0;  ///< zero selects 5 delta d0
    std::uint64_t seed = 0;
    /// Slices kept equal to z* besides t = 0 (for example epoch ends).
    std::vector<std::size_t> frozen_slices;
};

/// Single-stage laminate built over a subsolution. Holds the per-slice strip
/// states; slices are materialized on demand.
class LaminateSolution : public DensityHistory {
public:
    double length() const override { return fields_->grid.L; }
    std::size_t slices() const override { return fields_->slices(); }
    double time(std::size_t n) const override { return fields_->times[n]; }
    PiecewiseSlice density(std::size_t n) const override;

    LaminateSlice materialize(std::size_t n) const;
    const SubsolutionFields& fields() const { return *fields_; }
    const WallSpec& walls() const { return walls_; }
    double strip_width() const { return delta_; }
    double phase() const { return phase_; }
    std::uint64_t seed() const { return seed_; }
    double eps() const { return eps_; }
    const std::vector<StripState>& strips(std::size_t n) const { return strips_[n]; }
    const LaminateDefects& defects() const { return defects_; }
    std::size_t layer_fallbacks() const { return fallbacks_; }

    friend LaminateSolution construct(const SubsolutionFields&, const WallSpec&,
                                      const LaminateOptions&);
    friend LaminateDefects measure_defects(LaminateSolution&);

private:
    const SubsolutionFields* fields_ = nullptr;
    WallSpec walls_;
    double delta_ = 0.0;
    double phase_ = 0.0;
    double eps_ = 0.0;
    std::uint64_t seed_ = 0;
    std::size_t fallbacks_ = 0;
    std::size_t adjusted_ = 0;
    std::vector<std::vector<StripState>> strips_;
    LaminateDefects defects_;
};

/// Builds the laminate and measures its defects. The subsolution fields must
/// outlive the result. Throws InfeasibleLaminateError when the measured
/// sup_dev exceeds eps, std::invalid_argument when delta is not in (0, h].
LaminateSolution construct(const SubsolutionFields& f, const WallSpec& w,
                           const LaminateOptions& opt);

/// Recomputes all defect fields and stores them on the solution.
LaminateDefects measure_defects(LaminateSolution& s);

/// ess osc of u over every dyadic subrectangle of each Q component whose
/// x-side is at least 4 delta, compared against d0 - 1e-9.
OscillationReport oscillation_over_dyadic(const DensityHistory& u, const SubsolutionFields& f,
                                          double delta, double d0);

/// Fraction of |Q| (cell measure summed over slices) on which two histories
/// differ by more than tol, and the largest pointwise difference there.
struct DifferenceReport {
    double fraction = 0.0;
    double sup_distance = 0.0;
};
DifferenceReport compare_on_q(const DensityHistory& a, const DensityHistory& b,
                              const SubsolutionFields& f, double tol = 1e-12);

/// One laminate per seed. Throws std::invalid_argument for fewer than two
/// seeds or when Q never holds four interior strips.
std::vector<LaminateSolution> distinct_solutions(const SubsolutionFields& f, const WallSpec& w,
                                                 double delta, double eps,
                                                 const std::vector<std::uint64_t>& seeds);

}  // namespace fbf
