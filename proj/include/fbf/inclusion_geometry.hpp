#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fbf/branch_inversion.hpp"
#include "fbf/field.hpp"
#include "fbf/modified_flux.hpp"
#include "fbf/parabolic_solver.hpp"

namespace fbf {

/// The two walls s-(r) and s+(r) restricted to a flux window [r1, r2].
struct WallSpec {
    FluxParams params;
    double r1 = 0.0;
    double r2 = 0.0;
    double omega1_lo = 0.0;  ///< s-(r1)
    double omega1_hi = 0.0;  ///< s-(r2)
    double omega2_lo = 0.0;  ///< s+(r1)
    double omega2_hi = 0.0;  ///< s+(r2)
    double d0 = 0.0;         ///< s+(r1) - s-(r2)
    std::shared_ptr<const BranchTable> branches;

    double omega1(double r) const { return branches->s_minus(r); }
    double omega2(double r) const { return branches->s_plus(r); }
    /// Axis-aligned distance from (slope, level) to the boundary of the open
    /// set {r1 < r < r2, omega1(r) < slope < omega2(r)}; negative outside.
    double distance_to_boundary(double slope, double level) const;
};

/// Validates rho(s0+) <= r1 < r2 <= r* and tabulates the wall endpoints.
WallSpec make_wall_spec(const FluxParams& p, double r1, double r2);

/// How the time integral defining w* is discretized. BackwardEuler and
/// ForwardEuler reproduce the solver's own update, which makes w*_x = v*
/// hold to round-off at interior faces.
enum class TimeRule { BackwardEuler, ForwardEuler, Trapezoid };

TimeRule time_rule_for(TimeScheme scheme);

/// v* = int_0^x u* at cell faces and w* = int rho*(u*) dt + W0 at cell
/// centres, on the stored times of a solver run.
struct SubsolutionFields {
    Grid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> u;  ///< u* per slice, per cell
    std::vector<std::vector<double>> v;  ///< per slice, N + 1 faces
    std::vector<std::vector<double>> w;  ///< per slice, N centres
    /// Per-cell rate used to advance w* into slice n (rho*(u*) at n = 0).
    /// Kept separately because differencing w* loses digits at small dt.
    std::vector<std::vector<double>> rate;
    /// Running integral V of v* at faces, its own prefix integral, and the
    /// per-slice constant w*_0 - V(x_0). The continuum w* is V plus that
    /// constant, so its x-derivative is v* exactly; it meets the centre values
    /// w_i up to the O(h^2) drift of the discrete antiderivative.
    std::vector<std::vector<double>> v_integral;
    std::vector<std::vector<double>> v_integral2;
    std::vector<double> w_anchor;
    std::vector<std::vector<std::uint8_t>> q_mask;
    /// min(v*_x - s-(r1), s+(r2) - v*_x); positive exactly on Q.
    std::vector<std::vector<double>> margin;
    double t_origin = 0.0;
    double horizon = 0.0;  ///< last stored time
    TimeRule rule = TimeRule::BackwardEuler;

    std::size_t slices() const { return times.size(); }
    /// Piecewise-linear v* between faces.
    double v_at(std::size_t n, double x) const;
    /// Continuum w* (see v_integral above).
    double w_at(std::size_t n, double x) const;
    /// Exact integral of the continuum w* over [a, b].
    double w_integral(std::size_t n, double a, double b) const;
    /// Mean over [a, b] of the discrete w*_t at slice n >= 1, which is
    /// constant on each cell.
    double wt_mean(std::size_t n, double a, double b) const;
    /// Cell index containing x (x = L maps to the last cell).
    int cell_of(double x) const;
    bool in_q(std::size_t n, int cell) const { return q_mask[n][cell] != 0; }
};

/// Builds v*, w* from a solver field. Throws std::invalid_argument when the
/// field does not lie in the domain of m (values outside [-1, 2]).
SubsolutionFields build_subsolution(const SpaceTimeField& u_star, const ModifiedFlux& m,
                                    TimeRule rule = TimeRule::BackwardEuler);

struct QComponent {
    int cells = 0;
    double x_min = 0.0;
    double x_max = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
};

struct QSummary {
    std::size_t q_cells = 0;
    std::vector<QComponent> components;
    bool touches_initial_time = false;
    bool full_slice_present = false;
    /// Q stays away from the final stored slice.
    bool bounded_in_time = true;
    double last_time_in_q = 0.0;
    double min_margin = 0.0;
};

/// Connected components of f.q_mask under edge adjacency in x and t.
std::vector<QComponent> q_components(const SubsolutionFields& f);

/// Fills f.q_mask/f.margin with the strict test s-(r1) < v*_x < s+(r2) and
/// summarises the connected components (edge adjacency in x and t).
QSummary compute_Q(SubsolutionFields& f, const WallSpec& w);

struct SubsolutionReport {
    bool pass = true;
    std::size_t cells_checked = 0;
    std::string first_failure;
    double max_wx_residual = 0.0;
    double max_wt_residual = 0.0;
    /// Minimum over Q of the distance from (v*_x, w*_t) to the boundary of
    /// the open set U bounded by the walls and the levels r1, r2.
    double min_boundary_distance = 0.0;
    /// Smallest of r - r1, r2 - r, rho(v*_x) - r below s0- and r - rho(v*_x)
    /// above s0+, with r = w*_t. Positive exactly inside U.
    double min_flux_margin = 0.0;
    /// Cells whose flux margin is within the rounding allowance of zero.
    std::size_t marginal_cells = 0;
    double allowance = 0.0;
};

/// Strict subsolution test on every Q cell: r1 < w*_t < r2 and
/// omega1(w*_t) < v*_x < omega2(w*_t), plus |w*_x - v*| <= 1e-6 (1 + |v*|)
/// on the faces adjacent to Q cells. The wall test runs in flux space
/// (omega1(r) < s iff r < rho(s) on the lower branch) so that no inversion
/// error enters. Where rho* touches rho to high order near the window
/// edges, the margin can drop below what doubles resolve; such cells pass
/// when the margin is above -allowance and are counted as marginal.
SubsolutionReport check_strict_subsolution(const SubsolutionFields& f, const WallSpec& w,
                                           const ModifiedFlux& m);

}  // namespace fbf
