#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fbf {

/// Uniform cell-centred grid on (0, L): cell i covers [i h, (i+1) h].
struct Grid {
    double L = 1.0;
    int N = 16;

    double h() const { return L / N; }
    double center(int i) const { return (i + 0.5) * h(); }
    double face(int j) const { return j * h(); }

    void validate() const {
        if (N < 16) throw std::invalid_argument("grid needs at least 16 cells");
        if (!(L > 0.0)) throw std::invalid_argument("grid length must be positive");
    }
};

/// Cell averages of a scalar on a Grid at strictly increasing times.
struct SpaceTimeField {
    Grid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    std::size_t slices() const { return times.size(); }
    const std::vector<double>& slice(std::size_t n) const { return values.at(n); }
    const std::vector<double>& last() const { return values.back(); }

    void append(double t, std::vector<double> v) {
        times.push_back(t);
        values.push_back(std::move(v));
    }
};

/// h * sum(u).
double discrete_mass(const std::vector<double>& u, double h);

}  // namespace fbf
