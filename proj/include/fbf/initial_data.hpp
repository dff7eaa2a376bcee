#pragma once

#include <string>
#include <vector>

#include "fbf/field.hpp"

namespace fbf {

/// Analytic initial densities with zero slope at both ends.
struct InitialDatum {
    enum class Kind { Constant, Cosine, Bump, Samples };
    Kind kind = Kind::Constant;
    double mean = 0.0;
    /// Cosine: amplitude of cos(mode * pi x / L). Bump: peak value.
    double amplitude = 0.0;
    int mode = 1;
    /// Bump profile sin(pi x / L)^(2 * power), shifted to the requested mean.
    int power = 8;
    std::vector<double> samples;

    static InitialDatum constant(double c);
    static InitialDatum cosine(double mean, double amplitude, int mode = 1);
    static InitialDatum bump(double mean, double peak, int power = 8);
    static InitialDatum from_samples(std::vector<double> values);

    /// Point value of the analytic profile (not defined for Samples).
    double operator()(double x, double L) const;

    /// Cell-centre samples on g. The two end pairs are replaced by their
    /// mean so that the one-sided end differences vanish exactly while the
    /// discrete mass is unchanged.
    std::vector<double> sample(const Grid& g) const;

    std::string describe() const;
};

}  // namespace fbf
