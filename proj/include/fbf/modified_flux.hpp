#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fbf/flux_model.hpp"

namespace fbf {

/// Raised when no admissible surrogate is found; `what()` names the
/// constraint that failed on the last attempt.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MatchSide { Left, Right };

/// One polynomial piece, stored in the local variable
/// tau = (s - origin) / scale with coefficients in increasing degree.
/// Blending zones also keep the factored slope S(tau) + (theta - S) W(tau),
/// which is used for derivatives because the expanded form loses digits
/// once divided by scale^k.
struct FluxSegment {
    double lo = 0.0;
    double hi = 0.0;
    double origin = 0.0;
    double scale = 1.0;
    std::vector<double> coeffs;
    std::vector<double> sigma_part;
    std::vector<double> weight;
    double theta = 0.0;
};

/// Increasing C^3 replacement of rho. It agrees with rho on the matched
/// ranges and is a piecewise polynomial elsewhere on [-1, 2].
class ModifiedFlux {
public:
    enum class Kind { TwoSided, OneSidedLeft, OneSidedRight };

    const FluxParams& base() const { return base_; }
    Kind kind() const { return kind_; }
    /// rho* may differ from rho only on the open interval (a_left, a_right).
    double a_left() const { return a_left_; }
    double a_right() const { return a_right_; }
    double theta0() const { return theta0_; }
    double theta1() const { return theta1_; }
    /// Flux window used by the two-sided build; zero for one-sided builds.
    double r1() const { return r1_; }
    double r2() const { return r2_; }
    /// Fraction of the rise r2 - r1 assigned to each blending zone.
    double blend_fraction() const { return blend_fraction_; }
    int attempts() const { return attempts_; }
    const std::vector<FluxSegment>& segments() const { return segments_; }
    std::vector<double> knots() const;

    /// True where rho* is defined to coincide with rho.
    bool in_matched_region(double s) const;

    /// Value (order 0) or derivative of order 1..3. Throws std::domain_error
    /// outside [-1, 2] or for an unsupported order.
    double eval(double s, int derivative_order = 0) const;
    /// One-sided limit of the given derivative order at s, taken from the
    /// piece on the left (from_left) or on the right of s.
    double limit(double s, int derivative_order, bool from_left) const;
    double value(double s) const { return eval(s, 0); }
    double slope(double s) const { return eval(s, 1); }

    friend ModifiedFlux build_two_sided(const FluxParams&, double, double);
    friend ModifiedFlux build_one_sided(const FluxParams&, double, MatchSide);
    friend ModifiedFlux modified_flux_from_parts(const FluxParams&, Kind, double, double, double,
                                                 double, double, double, double,
                                                 std::vector<FluxSegment>);

private:
    FluxParams base_{};
    Kind kind_ = Kind::TwoSided;
    double a_left_ = -1.0;
    double a_right_ = 2.0;
    double r1_ = 0.0;
    double r2_ = 0.0;
    double theta0_ = 0.0;
    double theta1_ = 0.0;
    double blend_fraction_ = 0.0;
    int attempts_ = 0;
    std::vector<FluxSegment> segments_;
};

/// Two-sided surrogate for a flux window rho(s0+) <= r1 < r2 <= r*:
/// identity outside (s-(r1), s+(r2)), below rho on (s-(r1), s-(r2)] and
/// above rho on [s+(r1), s+(r2)).
ModifiedFlux build_two_sided(const FluxParams& p, double r1, double r2);

/// One-sided surrogate: identity on [-1, match_upto] (Left, needs
/// match_upto < s0-) or on [match_upto, 2] (Right, needs match_upto > s0+).
ModifiedFlux build_one_sided(const FluxParams& p, double match_upto, MatchSide side);

/// Rebuilds a surrogate from serialized pieces; bounds are taken as given.
ModifiedFlux modified_flux_from_parts(const FluxParams& p, ModifiedFlux::Kind kind, double a_left,
                                      double a_right, double r1, double r2, double theta0,
                                      double theta1, double blend_fraction,
                                      std::vector<FluxSegment> segments);

std::string to_string(ModifiedFlux::Kind k);

}  // namespace fbf
