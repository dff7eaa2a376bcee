#pragma once

#include <string>

namespace fbf {

/// Model coefficients of the cubic flux rho(s) = a*b*s^3 - 2*a*s^2 + s.
/// `alpha` measures adhesion strength and `beta` the volume-filling
/// correction; both live in [0,1].
struct FluxParams {
    double alpha = 0.0;
    double beta = 0.0;

    /// Throws std::invalid_argument unless both coefficients lie in [0,1].
    void validate() const;
};

enum class ModelType { TypeI, TypeII };

enum class RegimeClass { F, FD, FDF, FDB, FDBD, FDBDF };

std::string to_string(ModelType t);
std::string to_string(RegimeClass c);

/// Roots of the diffusivity and the flux thresholds they induce. Only
/// meaningful for parameters in the FDBDF region.
struct CriticalData {
    double s0_minus = 0.0;
    double s0_plus = 0.0;
    double s1_minus = 0.0;
    double s1_plus = 0.0;
    double s2_minus = 0.0;
    double s2_plus = 0.0;
    double r_star = 0.0;
    ModelType model_type = ModelType::TypeI;
};

double eval_rho(const FluxParams& p, double s);
double eval_sigma(const FluxParams& p, double s);
/// Derivative of the diffusivity, 6*a*b*s - 4*a.
double eval_sigma_prime(const FluxParams& p, double s);

/// True when sigma has two simple roots inside (0,1) with sigma(1) > 0.
bool in_fdbdf_region(const FluxParams& p);

/// Roots s0- < s0+ of sigma. Requires disc >= 0 and alpha, beta > 0.
void diffusivity_roots(const FluxParams& p, double& lower, double& upper);

/// Full threshold table. Throws std::domain_error outside FDBDF.
CriticalData critical_points(const FluxParams& p);

/// Sign word of sigma on [0,1]. Points on a region boundary (double root,
/// or a root at s = 1, within 1e-12 relative) fall into the degenerate class.
RegimeClass classify_regime(const FluxParams& p);

}  // namespace fbf
