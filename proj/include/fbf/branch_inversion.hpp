#pragma once

#include "fbf/flux_model.hpp"

namespace fbf {

enum class Branch { Minus, Plus };

/// Solves rho(s) = r for s in [lo, hi], assuming rho is nondecreasing there
/// and rho(lo) <= r <= rho(hi). Bisection keeps the bracket; Newton steps are
/// taken only while they stay inside it and |sigma| >= 1e-3.
double solve_monotone_branch(const FluxParams& p, double r, double lo, double hi, double tol);

struct BranchEndpoints {
    double s1_minus;
    double s1_plus;
    double s2_minus;
    double s2_plus;
};

/// Inverses of rho on the outer increasing pieces (0, s0-] and [s0+, 1],
/// defined for flux levels in [rho(s0+), r*].
class BranchTable {
public:
    explicit BranchTable(const FluxParams& p, double tol = 1e-12);

    const FluxParams& params() const { return params_; }
    const CriticalData& crit() const { return crit_; }
    double tol() const { return tol_; }
    double r_min() const { return r_min_; }
    double r_max() const { return crit_.r_star; }

    /// Throws std::out_of_range naming [rho(s0+), r*] when r is outside it.
    double invert(double r, Branch side) const;
    double s_minus(double r) const { return invert(r, Branch::Minus); }
    double s_plus(double r) const { return invert(r, Branch::Plus); }

    BranchEndpoints endpoints() const;

private:
    FluxParams params_;
    CriticalData crit_;
    double tol_;
    double r_min_;
};

}  // namespace fbf
