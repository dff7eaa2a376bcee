#include "fbf/modified_flux.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "fbf/branch_inversion.hpp"

namespace fbf {

namespace {

using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

Poly poly_add(Poly a, const Poly& b, double scale_b = 1.0) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale_b * b[i];
    return a;
}

/// Antiderivative vanishing at tau = 0.
Poly poly_integrate(const Poly& a) {
    Poly out(a.size() + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i + 1] = a[i] / static_cast<double>(i + 1);
    return out;
}

double poly_eval_derivative(const Poly& c, double tau, int order) {
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > static_cast<std::size_t>(order);) {
        double factor = 1.0;
        for (int k = 0; k < order; ++k) factor *= static_cast<double>(i - k);
        acc = acc * tau + factor * c[i];
    }
    return acc;
}

// C^2 smoothstep 10t^3 - 15t^4 + 6t^5 and its mirror image t -> -t.
const Poly kRamp = {0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
const Poly kRampMirror = {0.0, 0.0, 0.0, -10.0, -15.0, -6.0};

/// sigma(origin + scale * tau) as a polynomial in tau.
Poly sigma_local(const FluxParams& p, double origin, double scale) {
    return {eval_sigma(p, origin), eval_sigma_prime(p, origin) * scale,
            3.0 * p.alpha * p.beta * scale * scale};
}

/// Blended derivative S + (theta - S) * weight, with S = local sigma.
Poly blended_slope(const Poly& sigma_loc, const Poly& weight, double theta) {
    Poly one_minus = poly_add(Poly{1.0}, weight, -1.0);
    return poly_add(poly_mul(sigma_loc, one_minus), weight, theta);
}

/// Integral over the blending zone of sigma * (1 - weight), in s units.
double blend_zone_rise(const FluxParams& p, double origin, double scale, const Poly& weight,
                       double tau_from, double tau_to) {
    const Poly part = poly_integrate(
        poly_mul(sigma_local(p, origin, scale), poly_add(Poly{1.0}, weight, -1.0)));
    return scale * (poly_eval_derivative(part, tau_to, 0) - poly_eval_derivative(part, tau_from, 0));
}

/// Largest zone width (capped at max_width) whose sigma*(1-weight) rise does
/// not exceed target. The rise is increasing in the width while sigma > 0.
double zone_width_for_rise(const FluxParams& p, double anchor, bool to_the_right, double target,
                           double max_width) {
    auto rise = [&](double width) {
        if (to_the_right) return blend_zone_rise(p, anchor, width, kRamp, 0.0, 1.0);
        return blend_zone_rise(p, anchor, width, kRampMirror, -1.0, 0.0);
    };
    if (rise(max_width) <= target) return max_width;
    double lo = 0.0;
    double hi = max_width;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * max_width; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rise(mid) <= target ? lo : hi) = mid;
    }
    return lo;
}

FluxSegment make_segment(double lo, double hi, double origin, double scale, Poly coeffs) {
    FluxSegment seg;
    seg.lo = lo;
    seg.hi = hi;
    seg.origin = origin;
    seg.scale = scale;
    seg.coeffs = std::move(coeffs);
    return seg;
}

FluxSegment blend_zone(const FluxParams& p, double anchor, double width, double theta,
                       const Poly& weight, double lo, double hi) {
    const Poly sig = sigma_local(p, anchor, width);
    Poly value = poly_integrate(blended_slope(sig, weight, theta));
    for (double& c : value) c *= width;
    value[0] = eval_rho(p, anchor);
    FluxSegment seg = make_segment(lo, hi, anchor, width, std::move(value));
    seg.sigma_part = sig;
    seg.weight = weight;
    seg.theta = theta;
    return seg;
}

/// Zone starting at `anchor` where rho* leaves rho (weight 0 -> 1).
FluxSegment leaving_zone(const FluxParams& p, double anchor, double width, double theta) {
    return blend_zone(p, anchor, width, theta, kRamp, anchor, anchor + width);
}

/// Zone ending at `anchor` where rho* rejoins rho (weight 1 -> 0).
FluxSegment joining_zone(const FluxParams& p, double anchor, double width, double theta) {
    return blend_zone(p, anchor, width, theta, kRampMirror, anchor - width, anchor);
}

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

double segment_eval(const FluxSegment& seg, double s, int order) {
    double tau = (s - seg.origin) / seg.scale;
    // Blending zones span tau in [0,1] or [-1,0]; pin the ends exactly so the
    // knot limits do not pick up round-off amplified by scale^-k.
    if (!seg.weight.empty()) {
        if (s == seg.lo) tau = seg.origin == seg.lo ? 0.0 : -1.0;
        if (s == seg.hi) tau = seg.origin == seg.hi ? 0.0 : 1.0;
    }
    if (order == 0 || seg.weight.empty()) {
        return poly_eval_derivative(seg.coeffs, tau, order) / std::pow(seg.scale, order);
    }
    // d^j/dtau^j of S - S W + theta W by the Leibniz rule, j = order - 1.
    const int j = order - 1;
    double acc = poly_eval_derivative(seg.sigma_part, tau, j) +
                 seg.theta * poly_eval_derivative(seg.weight, tau, j);
    for (int i = 0; i <= j; ++i) {
        acc -= binomial(j, i) * poly_eval_derivative(seg.sigma_part, tau, i) *
               poly_eval_derivative(seg.weight, tau, j - i);
    }
    return acc / std::pow(seg.scale, j);
}

double rho_derivative(const FluxParams& p, double s, int order) {
    switch (order) {
        case 0: return eval_rho(p, s);
        case 1: return eval_sigma(p, s);
        case 2: return eval_sigma_prime(p, s);
        default: return 6.0 * p.alpha * p.beta;
    }
}

/// Fills theta0/theta1 from 1e5 uniform samples of the slope on [-1, 2],
/// with a 1% safety margin on each side.
void set_slope_bounds(ModifiedFlux& m, double& theta0, double& theta1) {
    constexpr int kSamples = 100000;
    double lo = INFINITY;
    double hi = -INFINITY;
    for (int i = 0; i <= kSamples; ++i) {
        const double s = -1.0 + 3.0 * static_cast<double>(i) / kSamples;
        const double d = m.eval(s, 1);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    theta0 = 0.99 * lo;
    theta1 = 1.01 * hi;
}

/// Sum of the absolute term sizes of a derivative at tau = +-1; the round-off
/// in a segment derivative is relative to this, not to the derivative value.
double term_magnitude(const FluxSegment& seg, int order) {
    double acc = 0.0;
    for (std::size_t i = order; i < seg.coeffs.size(); ++i) {
        double factor = 1.0;
        for (int k = 0; k < order; ++k) factor *= static_cast<double>(i - k);
        acc += factor * std::abs(seg.coeffs[i]);
    }
    return acc / std::pow(seg.scale, order);
}

/// Checks C^3 continuity at every internal knot; returns an empty string
/// when all jumps are within 1e-8 relative to the size of the terms involved.
std::string knot_continuity_violation(const ModifiedFlux& m) {
    for (double k : m.knots()) {
        for (int order = 0; order <= 3; ++order) {
            const double left = m.limit(k, order, true);
            const double right = m.limit(k, order, false);
            double magnitude = std::max({1.0, std::abs(left), std::abs(right)});
            for (const auto& seg : m.segments()) {
                if (seg.lo == k || seg.hi == k) magnitude = std::max(magnitude, term_magnitude(seg, order));
            }
            if (std::abs(left - right) > 1e-8 * magnitude) {
                std::ostringstream msg;
                msg << "C3 continuity fails at knot " << k << " for derivative order " << order;
                return msg.str();
            }
        }
    }
    return {};
}

}  // namespace

std::string to_string(ModifiedFlux::Kind k) {
    switch (k) {
        case ModifiedFlux::Kind::TwoSided: return "two_sided";
        case ModifiedFlux::Kind::OneSidedLeft: return "one_sided_left";
        case ModifiedFlux::Kind::OneSidedRight: return "one_sided_right";
    }
    return "?";
}

std::vector<double> ModifiedFlux::knots() const {
    std::vector<double> out;
    for (const auto& seg : segments_) {
        if (out.empty() || out.back() != seg.lo) out.push_back(seg.lo);
        out.push_back(seg.hi);
    }
    // The outer ends of one-sided builds coincide with the domain edge.
    out.erase(std::remove_if(out.begin(), out.end(), [](double k) { return k <= -1.0 || k >= 2.0; }),
              out.end());
    return out;
}

bool ModifiedFlux::in_matched_region(double s) const {
    switch (kind_) {
        case Kind::TwoSided: return s <= a_left_ || s >= a_right_;
        case Kind::OneSidedLeft: return s <= a_left_;
        case Kind::OneSidedRight: return s >= a_right_;
    }
    return false;
}

double ModifiedFlux::eval(double s, int derivative_order) const {
    if (!(s >= -1.0 && s <= 2.0)) {
        std::ostringstream msg;
        msg << "modified flux evaluated at " << s << " outside [-1, 2]";
        throw std::domain_error(msg.str());
    }
    if (derivative_order < 0 || derivative_order > 3) {
        throw std::domain_error("modified flux supports derivative orders 0..3");
    }
    if (in_matched_region(s)) return rho_derivative(base_, s, derivative_order);
    auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                               [](double x, const FluxSegment& seg) { return x < seg.lo; });
    if (it != segments_.begin()) --it;
    return segment_eval(*it, s, derivative_order);
}

double ModifiedFlux::limit(double s, int derivative_order, bool from_left) const {
    for (const auto& seg : segments_) {
        if (from_left && seg.lo < s && s <= seg.hi) return segment_eval(seg, s, derivative_order);
        if (!from_left && seg.lo <= s && s < seg.hi) return segment_eval(seg, s, derivative_order);
    }
    return rho_derivative(base_, s, derivative_order);
}

ModifiedFlux build_two_sided(const FluxParams& p, double r1, double r2) {
    const BranchTable table(p);
    if (!(r1 >= table.r_min() && r1 < r2 && r2 <= table.r_max())) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "two-sided window requires " << table.r_min() << " <= r1 < r2 <= " << table.r_max();
        throw std::invalid_argument(msg.str());
    }
    const double a = table.s_minus(r1);
    const double b = table.s_plus(r2);
    const double lower_end = table.s_minus(r2);
    const double upper_start = table.s_plus(r1);
    const double s0m = table.crit().s0_minus;
    const double s0p = table.crit().s0_plus;
    const double rise = r2 - r1;

    // Fallback order: first shift more of the rise into the blending zones
    // (which lowers the plateau slope), then try thinner zones.
    const std::array<double, 7> fractions = {0.25, 0.35, 0.45, 0.49, 0.15, 0.05, 0.01};
    std::string last_violation = "no attempt made";
    int attempt = 0;
    for (double fraction : fractions) {
        ++attempt;
        const double width_left = zone_width_for_rise(p, a, true, fraction * rise, s0m - a);
        const double width_right = zone_width_for_rise(p, b, false, fraction * rise, b - s0p);
        const double rise_left = blend_zone_rise(p, a, width_left, kRamp, 0.0, 1.0);
        const double rise_right = blend_zone_rise(p, b, width_right, kRampMirror, -1.0, 0.0);
        const double plateau_measure = (b - a) - 0.5 * (width_left + width_right);
        const double theta = (rise - rise_left - rise_right) / plateau_measure;
        if (!(theta > 0.0) || a + width_left >= b - width_right) {
            last_violation = "plateau slope is not positive";
            continue;
        }

        ModifiedFlux m;
        m.base_ = p;
        m.kind_ = ModifiedFlux::Kind::TwoSided;
        m.a_left_ = a;
        m.a_right_ = b;
        m.r1_ = r1;
        m.r2_ = r2;
        m.blend_fraction_ = fraction;
        m.attempts_ = attempt;
        FluxSegment left = leaving_zone(p, a, width_left, theta);
        FluxSegment right = joining_zone(p, b, width_right, theta);
        const double plateau_start = left.hi;
        const double plateau_value = segment_eval(left, plateau_start, 0);
        m.segments_.push_back(std::move(left));
        m.segments_.push_back(
            make_segment(plateau_start, right.lo, plateau_start, 1.0, {plateau_value, theta}));
        m.segments_.push_back(std::move(right));

        set_slope_bounds(m, m.theta0_, m.theta1_);
        if (!(m.theta0_ > 0.0)) {
            last_violation = "slope lower bound theta0 is not positive";
            continue;
        }
        last_violation = knot_continuity_violation(m);
        if (!last_violation.empty()) continue;

        constexpr int kOrderSamples = 4096;
        for (int i = 1; i <= kOrderSamples && last_violation.empty(); ++i) {
            const double frac = static_cast<double>(i) / kOrderSamples;
            const double s_low = a + frac * (lower_end - a);
            if (!(m.eval(s_low) < eval_rho(p, s_low))) {
                last_violation = "rho* < rho fails on (s-(r1), s-(r2)]";
            }
            const double s_up = upper_start + (frac - 1.0 / kOrderSamples) * (b - upper_start);
            if (!(m.eval(s_up) > eval_rho(p, s_up))) {
                last_violation = "rho* > rho fails on [s+(r1), s+(r2))";
            }
        }
        if (last_violation.empty()) return m;
    }
    throw InfeasibleError("two-sided surrogate infeasible after fallback schedule: " +
                          last_violation);
}

ModifiedFlux build_one_sided(const FluxParams& p, double match_upto, MatchSide side) {
    const CriticalData crit = critical_points(p);
    ModifiedFlux m;
    m.base_ = p;
    m.attempts_ = 1;
    if (side == MatchSide::Left) {
        if (!(match_upto < crit.s0_minus && match_upto > -1.0)) {
            throw std::invalid_argument("left one-sided surrogate needs match_upto < s0-");
        }
        const double width = 0.25 * (crit.s0_minus - match_upto);
        const double theta = eval_sigma(p, match_upto + width);
        m.kind_ = ModifiedFlux::Kind::OneSidedLeft;
        m.a_left_ = match_upto;
        m.a_right_ = 2.0;
        FluxSegment zone = leaving_zone(p, match_upto, width, theta);
        const double start = zone.hi;
        const double value = segment_eval(zone, start, 0);
        m.segments_.push_back(std::move(zone));
        m.segments_.push_back(make_segment(start, 2.0, start, 1.0, {value, theta}));
    } else {
        if (!(match_upto > crit.s0_plus && match_upto < 2.0)) {
            throw std::invalid_argument("right one-sided surrogate needs match_upto > s0+");
        }
        const double width = 0.25 * (match_upto - crit.s0_plus);
        const double theta = eval_sigma(p, match_upto - width);
        m.kind_ = ModifiedFlux::Kind::OneSidedRight;
        m.a_left_ = -1.0;
        m.a_right_ = match_upto;
        FluxSegment zone = joining_zone(p, match_upto, width, theta);
        const double end = zone.lo;
        const double value = segment_eval(zone, end, 0);
        m.segments_.push_back(make_segment(-1.0, end, end, 1.0, {value, theta}));
        m.segments_.push_back(std::move(zone));
    }
    set_slope_bounds(m, m.theta0_, m.theta1_);
    if (!(m.theta0_ > 0.0)) {
        throw InfeasibleError("one-sided surrogate has a non-positive slope bound");
    }
    const std::string violation = knot_continuity_violation(m);
    if (!violation.empty()) throw InfeasibleError(violation);
    return m;
}

ModifiedFlux modified_flux_from_parts(const FluxParams& p, ModifiedFlux::Kind kind, double a_left,
                                      double a_right, double r1, double r2, double theta0,
                                      double theta1, double blend_fraction,
                                      std::vector<FluxSegment> segments) {
    ModifiedFlux m;
    m.base_ = p;
    m.kind_ = kind;
    m.a_left_ = a_left;
    m.a_right_ = a_right;
    m.r1_ = r1;
    m.r2_ = r2;
    m.theta0_ = theta0;
    m.theta1_ = theta1;
    m.blend_fraction_ = blend_fraction;
    m.attempts_ = 0;
    m.segments_ = std::move(segments);
    return m;
}

}  // namespace fbf
