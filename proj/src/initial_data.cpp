#include "fbf/initial_data.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fbf {

namespace {

/// Mean of sin^(2p) over a period: C(2p, p) / 4^p.
double sine_power_mean(int p) {
    double out = 1.0;
    for (int k = 1; k <= p; ++k) out *= (p + k) / (4.0 * k);
    return out;
}

}  // namespace

InitialDatum InitialDatum::constant(double c) {
    InitialDatum d;
    d.kind = Kind::Constant;
    d.mean = c;
    return d;
}

InitialDatum InitialDatum::cosine(double mean, double amplitude, int mode) {
    InitialDatum d;
    d.kind = Kind::Cosine;
    d.mean = mean;
    d.amplitude = amplitude;
    d.mode = mode;
    return d;
}

InitialDatum InitialDatum::bump(double mean, double peak, int power) {
    if (power < 1) throw std::invalid_argument("bump power must be positive");
    InitialDatum d;
    d.kind = Kind::Bump;
    d.mean = mean;
    d.amplitude = peak;
    d.power = power;
    return d;
}

InitialDatum InitialDatum::from_samples(std::vector<double> values) {
    InitialDatum d;
    d.kind = Kind::Samples;
    d.samples = std::move(values);
    return d;
}

double InitialDatum::operator()(double x, double L) const {
    switch (kind) {
        case Kind::Constant: return mean;
        case Kind::Cosine: return mean + amplitude * std::cos(mode * M_PI * x / L);
        case Kind::Bump: {
            const double g_mean = sine_power_mean(power);
            const double scale = (amplitude - mean) / (1.0 - g_mean);
            const double g = std::pow(std::sin(M_PI * x / L), 2 * power);
            return mean + scale * (g - g_mean);
        }
        case Kind::Samples: break;
    }
    throw std::logic_error("sampled datum has no analytic profile");
}

std::vector<double> InitialDatum::sample(const Grid& g) const {
    g.validate();
    std::vector<double> u;
    if (kind == Kind::Samples) {
        if (samples.size() != static_cast<std::size_t>(g.N)) {
            throw std::invalid_argument("sampled datum does not match the grid size");
        }
        u = samples;
    } else {
        u.resize(g.N);
        for (int i = 0; i < g.N; ++i) u[i] = (*this)(g.center(i), g.L);
    }
    const double left = 0.5 * (u[0] + u[1]);
    const double right = 0.5 * (u[g.N - 2] + u[g.N - 1]);
    u[0] = u[1] = left;
    u[g.N - 2] = u[g.N - 1] = right;
    return u;
}

std::string InitialDatum::describe() const {
    std::ostringstream out;
    out.precision(17);
    switch (kind) {
        case Kind::Constant: out << "constant " << mean; break;
        case Kind::Cosine:
            out << "cosine mean=" << mean << " amplitude=" << amplitude << " mode=" << mode;
            break;
        case Kind::Bump:
            out << "bump mean=" << mean << " peak=" << amplitude << " power=" << power;
            break;
        case Kind::Samples: out << "samples n=" << samples.size(); break;
    }
    return out.str();
}

}  // namespace fbf
