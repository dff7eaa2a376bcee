#include "fbf/branch_inversion.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fbf {

double solve_monotone_branch(const FluxParams& p, double r, double lo, double hi, double tol) {
    double f_lo = eval_rho(p, lo) - r;
    double f_hi = eval_rho(p, hi) - r;
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if (f_lo > 0.0 || f_hi < 0.0) {
        throw std::out_of_range("flux level is not bracketed by the branch interval");
    }
    double s = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = eval_rho(p, s) - r;
        if (f == 0.0) return s;
        if (f < 0.0) {
            lo = s;
        } else {
            hi = s;
        }
        const double slope = eval_sigma(p, s);
        double next = 0.5 * (lo + hi);
        if (std::abs(slope) >= 1e-3) {
            const double newton = s - f / slope;
            if (newton > lo && newton < hi) next = newton;
        }
        if (std::abs(next - s) <= tol) return next;
        if (hi - lo <= tol) return 0.5 * (lo + hi);
        s = next;
    }
    return s;
}

BranchTable::BranchTable(const FluxParams& p, double tol)
    : params_(p), crit_(critical_points(p)), tol_(tol), r_min_(eval_rho(p, crit_.s0_plus)) {}

double BranchTable::invert(double r, Branch side) const {
    // Levels typed as decimals (0.1 for rho(1) = 0.09999999999999998) are
    // accepted when they miss the range by round-off only.
    constexpr double kSlack = 1e-14;
    if (r < r_min_ && r >= r_min_ - kSlack) r = r_min_;
    if (r > crit_.r_star && r <= crit_.r_star + kSlack) r = crit_.r_star;
    if (!(r >= r_min_ && r <= crit_.r_star)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "flux level " << r << " outside the invertible range [" << r_min_ << ", "
            << crit_.r_star << "]";
        throw std::out_of_range(msg.str());
    }
    if (side == Branch::Minus) {
        if (r == crit_.r_star) return crit_.s2_minus;
        double s = solve_monotone_branch(params_, r, 0.0, crit_.s0_minus, 0.01 * tol_);
        if (std::abs(s - crit_.s0_minus) <= tol_) s = crit_.s0_minus;
        return s;
    }
    if (r == r_min_) return crit_.s0_plus;
    if (r == crit_.r_star) return crit_.s2_plus;
    double s = solve_monotone_branch(params_, r, crit_.s0_plus, 1.0, 0.01 * tol_);
    if (std::abs(s - crit_.s0_plus) <= tol_) s = crit_.s0_plus;
    if (std::abs(s - 1.0) <= tol_) s = 1.0;
    return s;
}

BranchEndpoints BranchTable::endpoints() const {
    return {invert(r_min_, Branch::Minus), invert(r_min_, Branch::Plus),
            invert(crit_.r_star, Branch::Minus), invert(crit_.r_star, Branch::Plus)};
}

}  // namespace fbf
