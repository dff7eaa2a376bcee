#include "fbf/weak_form_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fbf {

std::string to_string(TimeProfile p) {
    switch (p) {
        case TimeProfile::Linear: return "linear";
        case TimeProfile::Quadratic: return "quadratic";
        case TimeProfile::Cubic: return "cubic";
        case TimeProfile::QuarterSine: return "quarter_sine";
    }
    return "unknown";
}

double TestFunction::theta(double t) const {
    const double s = 1.0 - (t - t_start) / (horizon - t_start);
    switch (profile) {
        case TimeProfile::Linear: return s;
        case TimeProfile::Quadratic: return s * s;
        case TimeProfile::Cubic: return s * s * s;
        case TimeProfile::QuarterSine: return std::sin(0.5 * M_PI * s);
    }
    return 0.0;
}

double TestFunction::theta_dt(double t) const {
    const double span = horizon - t_start;
    const double s = 1.0 - (t - t_start) / span;
    switch (profile) {
        case TimeProfile::Linear: return -1.0 / span;
        case TimeProfile::Quadratic: return -2.0 * s / span;
        case TimeProfile::Cubic: return -3.0 * s * s / span;
        case TimeProfile::QuarterSine: return -0.5 * M_PI * std::cos(0.5 * M_PI * s) / span;
    }
    return 0.0;
}

std::vector<TestFunction> catalog(int max_mode, double t_start, double horizon) {
    std::vector<TestFunction> out;
    for (int k = 0; k <= max_mode; ++k) {
        for (TimeProfile p : {TimeProfile::Linear, TimeProfile::Quadratic, TimeProfile::Cubic,
                              TimeProfile::QuarterSine}) {
            out.push_back({k, p, t_start, horizon});
        }
    }
    return out;
}

void GluedHistory::add(const DensityHistory* part) {
    const std::size_t p = parts_.size();
    parts_.push_back(part);
    for (std::size_t n = (p == 0 ? 0 : 1); n < part->slices(); ++n) index_.emplace_back(p, n);
}

double GluedHistory::time(std::size_t n) const {
    const auto [p, k] = index_.at(n);
    return parts_[p]->time(k);
}

PiecewiseSlice GluedHistory::density(std::size_t n) const {
    const auto [p, k] = index_.at(n);
    return parts_[p]->density(k);
}

namespace {

/// Exact moments int u cos(k pi x / L) and int flux(u) cos(k pi x / L) for
/// k = 0..max_mode on one piecewise-constant slice. The cell integrals use
/// the antiderivative L sin(k pi x / L) / (k pi), with sines of multiples
/// generated by the Chebyshev recurrence.
void slice_moments(const PiecewiseSlice& s, double L, const FluxFn& flux, int max_mode,
                   std::vector<double>& mass_moment, std::vector<double>& flux_moment) {
    mass_moment.assign(max_mode + 1, 0.0);
    flux_moment.assign(max_mode + 1, 0.0);
    std::vector<double> left(max_mode + 1), right(max_mode + 1);
    // out[k] = int_0^x cos(k pi y / L) dy
    auto primitive_at = [&](double x, std::vector<double>& out) {
        const double arg = M_PI * x / L;
        const double c = std::cos(arg);
        out[0] = x;
        double prev = 0.0, cur = std::sin(arg);
        for (int k = 1; k <= max_mode; ++k) {
            out[k] = L * cur / (k * M_PI);
            const double next = 2.0 * c * cur - prev;
            prev = cur;
            cur = next;
        }
    };
    primitive_at(s.x[0], left);
    for (std::size_t j = 0; j < s.u.size(); ++j) {
        primitive_at(s.x[j + 1], right);
        const double fu = flux ? flux(s.u[j]) : 0.0;
        for (int k = 0; k <= max_mode; ++k) {
            const double weight = right[k] - left[k];
            mass_moment[k] += s.u[j] * weight;
            flux_moment[k] += fu * weight;
        }
        std::swap(left, right);
    }
}

struct Moments {
    std::vector<double> times;
    std::vector<std::vector<double>> mass;
    std::vector<std::vector<double>> flux;
};

Moments collect(const DensityHistory& u, const FluxFn& flux, int max_mode, std::size_t n_begin,
                std::size_t n_end) {
    Moments m;
    for (std::size_t n = n_begin; n <= n_end; ++n) {
        std::vector<double> a, b;
        slice_moments(u.density(n), u.length(), flux, max_mode, a, b);
        m.times.push_back(u.time(n));
        m.mass.push_back(std::move(a));
        m.flux.push_back(std::move(b));
    }
    return m;
}

/// Window functional from precomputed moments. The u phi_t term integrates
/// Theta' exactly on each step against a mean of the mass moment, so a
/// constant mass moment telescopes to the boundary terms.
double functional(const Moments& m, const TestFunction& tf, double L, TimeQuadrature rule) {
    const int k = tf.mode;
    const double wave = (k * M_PI / L) * (k * M_PI / L);
    double acc = 0.0;
    for (std::size_t n = 0; n + 1 < m.times.size(); ++n) {
        const double t0 = m.times[n], t1 = m.times[n + 1];
        const double th0 = tf.theta(t0), th1 = tf.theta(t1);
        if (rule == TimeQuadrature::Trapezoid) {
            acc += 0.5 * (m.mass[n][k] + m.mass[n + 1][k]) * (th1 - th0);
            acc -= wave * 0.5 * (t1 - t0) * (th0 * m.flux[n][k] + th1 * m.flux[n + 1][k]);
        } else {
            acc += m.mass[n][k] * (th1 - th0);
            acc -= wave * (t1 - t0) * th1 * m.flux[n + 1][k];
        }
    }
    acc += tf.theta(m.times.front()) * m.mass.front()[k];
    acc -= tf.theta(m.times.back()) * m.mass.back()[k];
    return acc;
}

void check_span(const DensityHistory& u, double t_start, double horizon) {
    const double tol = 1e-9 * std::max(1.0, std::abs(horizon));
    if (std::abs(u.time(0) - t_start) > tol || std::abs(u.time(u.slices() - 1) - horizon) > tol) {
        std::ostringstream msg;
        msg.precision(12);
        msg << "history spans [" << u.time(0) << ", " << u.time(u.slices() - 1)
            << "] but the test function spans [" << t_start << ", " << horizon << "]";
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

double weak_functional(const DensityHistory& u, const TestFunction& tf, const FluxFn& flux,
                       std::size_t n_begin, std::size_t n_end, TimeQuadrature rule) {
    if (n_begin > n_end || n_end >= u.slices()) throw std::out_of_range("bad slice window");
    return functional(collect(u, flux, tf.mode, n_begin, n_end), tf, u.length(), rule);
}

double weak_residual(const DensityHistory& u, const PiecewiseSlice& u0, const TestFunction& tf,
                     const FluxFn& flux, TimeQuadrature rule) {
    check_span(u, tf.t_start, tf.horizon);
    Moments m = collect(u, flux, tf.mode, 0, u.slices() - 1);
    double value = functional(m, tf, u.length(), rule);
    std::vector<double> a, b;
    slice_moments(u0, u.length(), nullptr, tf.mode, a, b);
    value += tf.theta(tf.t_start) * (a[tf.mode] - m.mass.front()[tf.mode]);
    return value;
}

std::vector<ResidualEntry> catalog_residuals(const DensityHistory& u, const FluxFn& flux,
                                             int max_mode, TimeQuadrature rule) {
    const Moments m = collect(u, flux, max_mode, 0, u.slices() - 1);
    std::vector<ResidualEntry> out;
    for (const TestFunction& tf : catalog(max_mode, m.times.front(), m.times.back())) {
        out.push_back({tf.mode, tf.profile, functional(m, tf, u.length(), rule)});
    }
    return out;
}

double worst_residual(const std::vector<ResidualEntry>& r) {
    double worst = 0.0;
    for (const auto& e : r) worst = std::max(worst, std::abs(e.value));
    return worst;
}

bool VerificationReport::pass() const {
    return std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.pass; });
}

double conservation_error(const DensityHistory& u, double expected_mass) {
    double worst = 0.0;
    for (std::size_t n = 0; n < u.slices(); ++n) {
        const PiecewiseSlice s = u.density(n);
        double mass = 0.0;
        for (std::size_t j = 0; j < s.u.size(); ++j) mass += s.u[j] * (s.x[j + 1] - s.x[j]);
        worst = std::max(worst, std::abs(mass - expected_mass));
    }
    return worst;
}

double two_point_distance(const LaminateSolution& s, double r0) {
    const double lo = s.walls().omega1(r0), hi = s.walls().omega2(r0);
    double worst = 0.0;
    for (std::size_t n = 0; n < s.slices(); ++n) {
        if (s.strips(n).empty()) continue;
        const LaminateSlice sl = s.materialize(n);
        for (std::size_t j = 0; j < sl.u.size(); ++j) {
            if (sl.kind[j] != IntervalKind::Laminated) continue;
            worst = std::max(worst, std::min(std::abs(sl.u[j] - lo), std::abs(sl.u[j] - hi)));
        }
    }
    return worst;
}

VerificationReport verify_conclusions(const ConclusionInputs& in) {
    if (!in.u) throw std::invalid_argument("verification needs a density history");
    VerificationReport rep;
    rep.case_label = in.case_label;
    rep.catalog_modes = in.max_mode;
    const double L = in.u->length();

    rep.conservation_error = conservation_error(*in.u, in.expected_mass);
    rep.add({"conservation", rep.conservation_error <= 1e-9 * L, rep.conservation_error, 1e-9 * L,
             "per-slice |int u dx - L mean|"});

    if (in.flux) {
        rep.residuals = catalog_residuals(*in.u, in.flux, in.max_mode, in.rule);
        rep.worst_residual = worst_residual(rep.residuals);
        rep.baseline_residual = in.baseline_residual;
    }

    if (in.laminate) {
        const LaminateDefects& d = in.laminate->defects();
        rep.add({"bands_outside_layers", d.band_violation_outside_layers == 0.0,
                 d.band_violation_outside_layers, 0.0,
                 "measure fraction of Q outside the two bands away from transition layers"});
        rep.add({"band_violation_within_layers", d.band_violation_measure <= d.layer_fraction,
                 d.band_violation_measure, d.layer_fraction, "violations bounded by layer share"});
        rep.add({"exterior_identity", d.boundary_mismatch == 0.0, d.boundary_mismatch, 0.0,
                 "max |z - z*| outside Q"});
        rep.add({"closeness", d.sup_dev <= in.laminate->eps(), d.sup_dev, in.laminate->eps(),
                 "max over Q of |z - z*|"});
    }
    if (in.fields && in.laminate) {
        const OscillationReport osc = oscillation_over_dyadic(*in.u, *in.fields, in.delta, in.d0);
        std::ostringstream detail;
        detail << osc.rectangles_tested << " dyadic rectangles";
        rep.add({"oscillation_floor", osc.pass, osc.min_oscillation, osc.floor, detail.str()});
    }
    if (!in.epoch_distances.empty()) {
        rep.two_point_distance_trace.resize(in.epoch_distances.size());
        double tail = 0.0;
        for (std::size_t k = in.epoch_distances.size(); k-- > 0;) {
            tail = std::max(tail, in.epoch_distances[k]);
            rep.two_point_distance_trace[k] = tail;
        }
        bool decreasing = true;
        double worst_step = -INFINITY;
        for (std::size_t k = 1; k < rep.two_point_distance_trace.size(); ++k) {
            const double step = rep.two_point_distance_trace[k] - rep.two_point_distance_trace[k - 1];
            worst_step = std::max(worst_step, step);
            if (!(step < 0.0)) decreasing = false;
        }
        rep.add({"two_point_trace_decreasing", decreasing, worst_step, 0.0,
                 "largest epoch-over-epoch change of the tail maximum"});
    }
    return rep;
}

}  // namespace fbf
