#include "fbf/flux_model.hpp"

#include <cmath>
#include <stdexcept>

#include "fbf/branch_inversion.hpp"

namespace fbf {

namespace {

constexpr double kBoundaryTol = 1e-12;

bool near_one(double s) { return std::abs(s - 1.0) <= kBoundaryTol; }

}  // namespace

void FluxParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("flux parameters must satisfy 0 <= alpha, beta <= 1");
    }
}

std::string to_string(ModelType t) { return t == ModelType::TypeI ? "TypeI" : "TypeII"; }

std::string to_string(RegimeClass c) {
    switch (c) {
        case RegimeClass::F: return "F";
        case RegimeClass::FD: return "FD";
        case RegimeClass::FDF: return "FDF";
        case RegimeClass::FDB: return "FDB";
        case RegimeClass::FDBD: return "FDBD";
        case RegimeClass::FDBDF: return "FDBDF";
    }
    return "?";
}

double eval_rho(const FluxParams& p, double s) {
    return ((p.alpha * p.beta * s - 2.0 * p.alpha) * s + 1.0) * s;
}

double eval_sigma(const FluxParams& p, double s) {
    return (3.0 * p.alpha * p.beta * s - 4.0 * p.alpha) * s + 1.0;
}

double eval_sigma_prime(const FluxParams& p, double s) {
    return 6.0 * p.alpha * p.beta * s - 4.0 * p.alpha;
}

void diffusivity_roots(const FluxParams& p, double& lower, double& upper) {
    const double a = p.alpha;
    const double b = p.beta;
    if (a <= 0.0 || b <= 0.0) {
        throw std::domain_error("diffusivity is not quadratic when alpha or beta vanishes");
    }
    const double half_disc = 4.0 * a * a - 3.0 * a * b;
    if (half_disc < 0.0) {
        throw std::domain_error("diffusivity has no real roots");
    }
    // Both roots are positive, so the '+' branch has the larger magnitude and
    // the other root follows from the product 1/(3ab) without cancellation.
    const double q = 2.0 * a + std::sqrt(half_disc);
    upper = q / (3.0 * a * b);
    lower = 1.0 / q;
}

bool in_fdbdf_region(const FluxParams& p) {
    return classify_regime(p) == RegimeClass::FDBDF;
}

RegimeClass classify_regime(const FluxParams& p) {
    const double a = p.alpha;
    const double b = p.beta;
    if (a == 0.0) return RegimeClass::F;
    if (b == 0.0) {
        // sigma = 1 - 4 a s, single root 1/(4a).
        const double root = 1.0 / (4.0 * a);
        if (near_one(root)) return RegimeClass::FD;
        return root > 1.0 ? RegimeClass::F : RegimeClass::FDB;
    }
    const double half_disc = 4.0 * a * a - 3.0 * a * b;
    if (std::abs(half_disc) <= kBoundaryTol * 4.0 * a * a) {
        const double root = 2.0 / (3.0 * b);
        if (near_one(root)) return RegimeClass::FD;
        return root < 1.0 ? RegimeClass::FDF : RegimeClass::F;
    }
    if (half_disc < 0.0) return RegimeClass::F;
    double lo = 0.0;
    double hi = 0.0;
    diffusivity_roots(p, lo, hi);
    if (near_one(lo)) return RegimeClass::FD;
    if (lo > 1.0) return RegimeClass::F;
    if (near_one(hi)) return RegimeClass::FDBD;
    return hi > 1.0 ? RegimeClass::FDB : RegimeClass::FDBDF;
}

CriticalData critical_points(const FluxParams& p) {
    p.validate();
    if (classify_regime(p) != RegimeClass::FDBDF) {
        throw std::domain_error("critical_points requires parameters in the FDBDF region");
    }
    CriticalData c;
    diffusivity_roots(p, c.s0_minus, c.s0_plus);
    const double rho_lo = eval_rho(p, c.s0_minus);
    const double rho_one = eval_rho(p, 1.0);
    c.model_type = rho_lo <= rho_one ? ModelType::TypeI : ModelType::TypeII;
    c.r_star = c.model_type == ModelType::TypeI ? rho_lo : rho_one;

    const double r_floor = eval_rho(p, c.s0_plus);
    c.s1_plus = c.s0_plus;
    c.s1_minus = solve_monotone_branch(p, r_floor, 0.0, c.s0_minus, 1e-14);
    if (c.model_type == ModelType::TypeI) {
        c.s2_minus = c.s0_minus;
        c.s2_plus = solve_monotone_branch(p, c.r_star, c.s0_plus, 1.0, 1e-14);
    } else {
        c.s2_minus = solve_monotone_branch(p, c.r_star, 0.0, c.s0_minus, 1e-14);
        c.s2_plus = 1.0;
    }
    return c;
}

}  // namespace fbf
