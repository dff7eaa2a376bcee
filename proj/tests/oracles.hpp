#pragma once

// Reference computations used to derive expected values independently of
// the library code paths they check.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline long double rho(long double a, long double b, long double s) {
    return a * b * s * s * s - 2.0L * a * s * s + s;
}

inline long double sigma(long double a, long double b, long double s) {
    return 3.0L * a * b * s * s - 4.0L * a * s + 1.0L;
}

/// Plain bisection for rho(s) = r on an interval where rho increases.
inline double bisect_rho(double a, double b, double r, double lo, double hi) {
    long double l = lo, h = hi;
    for (int i = 0; i < 200; ++i) {
        const long double m = 0.5L * (l + h);
        if (rho(a, b, m) < r) {
            l = m;
        } else {
            h = m;
        }
    }
    return static_cast<double>(0.5L * (l + h));
}

/// Sign word of sigma on [0,1] from uniform samples plus the textbook
/// quadratic roots; '+' -> F, 0 -> D, '-' -> B, consecutive repeats merged.
inline std::string sign_word(double a, double b, int samples, bool include_roots = true) {
    std::vector<long double> pts;
    for (int i = 0; i <= samples; ++i) pts.push_back(static_cast<long double>(i) / samples);
    if (include_roots && a > 0.0) {
        if (b == 0.0) {
            pts.push_back(1.0L / (4.0L * a));
        } else {
            const long double disc = 16.0L * a * a - 12.0L * a * b;
            if (disc >= -1e-12L) {
                const long double sq = std::sqrt(std::max(disc, 0.0L));
                pts.push_back((4.0L * a - sq) / (6.0L * a * b));
                pts.push_back((4.0L * a + sq) / (6.0L * a * b));
            }
        }
    }
    std::vector<long double> kept;
    for (long double s : pts) {
        if (s >= 0.0L && s <= 1.0L + 1e-12L) kept.push_back(std::min(s, 1.0L));
    }
    std::sort(kept.begin(), kept.end());
    std::string word;
    for (long double s : kept) {
        const long double v = sigma(a, b, s);
        const char c = std::abs(v) <= 1e-9L ? 'D' : (v > 0 ? 'F' : 'B');
        if (word.empty() || word.back() != c) word.push_back(c);
    }
    // A sign change between two samples hides a simple root.
    std::string out;
    for (char c : word) {
        if (!out.empty() && out.back() != 'D' && c != 'D' && out.back() != c) out.push_back('D');
        out.push_back(c);
    }
    return out;
}

struct Rng {
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
    std::mt19937_64 gen;
};

}  // namespace oracle
