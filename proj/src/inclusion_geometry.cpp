#include "fbf/inclusion_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fbf {

WallSpec make_wall_spec(const FluxParams& p, double r1, double r2) {
    auto table = std::make_shared<const BranchTable>(p);
    if (!(r1 < r2)) throw std::invalid_argument("flux window needs r1 < r2");
    if (r1 < table->r_min() || r2 > table->r_max()) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "flux window [" << r1 << ", " << r2 << "] leaves [" << table->r_min() << ", "
            << table->r_max() << "]";
        throw std::invalid_argument(msg.str());
    }
    WallSpec w;
    w.params = p;
    w.r1 = r1;
    w.r2 = r2;
    w.branches = table;
    w.omega1_lo = table->s_minus(r1);
    w.omega1_hi = table->s_minus(r2);
    w.omega2_lo = table->s_plus(r1);
    w.omega2_hi = table->s_plus(r2);
    w.d0 = w.omega2_lo - w.omega1_hi;
    return w;
}

double WallSpec::distance_to_boundary(double slope, double level) const {
    const double vertical = std::min(level - r1, r2 - level);
    if (vertical <= 0.0) return vertical;
    return std::min({vertical, slope - omega1(level), omega2(level) - slope});
}

TimeRule time_rule_for(TimeScheme scheme) {
    return scheme == TimeScheme::ExplicitEuler ? TimeRule::ForwardEuler
                                               : TimeRule::BackwardEuler;
}

namespace {

/// Integral of the running integral V over [0, x] on one slice.
double running_integral_integral(const SubsolutionFields& f, std::size_t n, double x) {
    const Grid& g = f.grid;
    const double h = g.h();
    const auto& v = f.v[n];
    const int j = std::clamp(static_cast<int>(std::floor(x / h)), 0, g.N - 1);
    const double tau = x - g.face(j);
    const double dv = v[j + 1] - v[j];
    return f.v_integral2[n][j] + f.v_integral[n][j] * tau + v[j] * tau * tau / 2.0 +
           dv * tau * tau * tau / (6.0 * h);
}

}  // namespace

int SubsolutionFields::cell_of(double x) const {
    const int i = static_cast<int>(std::floor(x / grid.h()));
    return std::clamp(i, 0, grid.N - 1);
}

double SubsolutionFields::v_at(std::size_t n, double x) const {
    const double h = grid.h();
    const int j = std::clamp(static_cast<int>(std::floor(x / h)), 0, grid.N - 1);
    const double tau = (x - grid.face(j)) / h;
    return v[n][j] + tau * (v[n][j + 1] - v[n][j]);
}

double SubsolutionFields::w_at(std::size_t n, double x) const {
    const double h = grid.h();
    const int j = std::clamp(static_cast<int>(std::floor(x / h)), 0, grid.N - 1);
    const double tau = x - grid.face(j);
    return w_anchor[n] + v_integral[n][j] + v[n][j] * tau +
           (v[n][j + 1] - v[n][j]) * tau * tau / (2.0 * h);
}

double SubsolutionFields::w_integral(std::size_t n, double a, double b) const {
    return running_integral_integral(*this, n, b) - running_integral_integral(*this, n, a) +
           w_anchor[n] * (b - a);
}

double SubsolutionFields::wt_mean(std::size_t n, double a, double b) const {
    if (n == 0 || n >= times.size()) throw std::out_of_range("wt_mean needs 1 <= n < slices");
    if (!(b > a)) throw std::invalid_argument("wt_mean needs a < b");
    double acc = 0.0;
    for (int i = cell_of(a); i < grid.N && grid.face(i) < b; ++i) {
        const double overlap = std::min(b, grid.face(i + 1)) - std::max(a, grid.face(i));
        if (overlap > 0.0) acc += overlap * rate[n][i];
    }
    return acc / (b - a);
}

SubsolutionFields build_subsolution(const SpaceTimeField& u_star, const ModifiedFlux& m,
                                    TimeRule rule) {
    const Grid& g = u_star.grid;
    g.validate();
    if (u_star.slices() == 0) throw std::invalid_argument("empty field");
    const double h = g.h();
    SubsolutionFields f;
    f.grid = g;
    f.times = u_star.times;
    f.u = u_star.values;
    f.t_origin = u_star.times.front();
    f.horizon = u_star.times.back();
    f.rule = rule;
    const std::size_t slices = u_star.slices();
    f.v.resize(slices);
    f.w.resize(slices);
    f.rate.resize(slices);
    f.v_integral.resize(slices);
    f.v_integral2.resize(slices);
    f.w_anchor.resize(slices);
    f.q_mask.assign(slices, std::vector<std::uint8_t>(g.N, 0));
    f.margin.assign(slices, std::vector<double>(g.N, -std::numeric_limits<double>::infinity()));

    std::vector<double> flux_prev;
    for (std::size_t n = 0; n < slices; ++n) {
        const auto& u = u_star.values[n];
        if (u.size() != static_cast<std::size_t>(g.N)) {
            throw std::invalid_argument("slice size does not match the grid");
        }
        std::vector<double> flux(g.N);
        for (int i = 0; i < g.N; ++i) {
            if (!(u[i] >= -1.0 && u[i] <= 2.0)) {
                throw std::invalid_argument("field value outside the domain of the flux surrogate");
            }
            flux[i] = m.eval(u[i]);
        }
        auto& v = f.v[n];
        v.assign(g.N + 1, 0.0);
        for (int i = 0; i < g.N; ++i) v[i + 1] = v[i] + h * u[i];

        auto& w = f.w[n];
        w.resize(g.N);
        auto& rate = f.rate[n];
        rate = flux;
        if (n == 0) {
            // Discrete antiderivative of v at the centres whose differences
            // across face j are exactly h * v_j.
            w[0] = u[0] * 0.125 * h * h;
            for (int i = 1; i < g.N; ++i) w[i] = w[i - 1] + h * v[i];
        } else {
            const double dt = f.times[n] - f.times[n - 1];
            const auto& prev = f.w[n - 1];
            for (int i = 0; i < g.N; ++i) {
                if (rule == TimeRule::ForwardEuler) rate[i] = flux_prev[i];
                if (rule == TimeRule::Trapezoid) rate[i] = 0.5 * (flux[i] + flux_prev[i]);
                w[i] = prev[i] + dt * rate[i];
            }
        }
        flux_prev = std::move(flux);

        auto& vf = f.v_integral[n];
        vf.assign(g.N + 1, 0.0);
        for (int j = 0; j < g.N; ++j) vf[j + 1] = vf[j] + 0.5 * h * (v[j] + v[j + 1]);
        f.w_anchor[n] = w[0] - (v[0] * 0.5 * h + (v[1] - v[0]) * 0.125 * h);
        auto& vf2 = f.v_integral2[n];
        vf2.assign(g.N + 1, 0.0);
        for (int j = 0; j < g.N; ++j) {
            vf2[j + 1] = vf2[j] + h * vf[j] + v[j] * h * h / 2.0 + (v[j + 1] - v[j]) * h * h / 6.0;
        }
    }
    return f;
}

std::vector<QComponent> q_components(const SubsolutionFields& f) {
    const std::size_t slices = f.slices();
    const int cells = f.grid.N;
    std::vector<QComponent> components;
    std::vector<std::vector<std::uint8_t>> seen(slices, std::vector<std::uint8_t>(cells, 0));
    const double h = f.grid.h();
    for (std::size_t n0 = 0; n0 < slices; ++n0) {
        for (int i0 = 0; i0 < cells; ++i0) {
            if (!f.q_mask[n0][i0] || seen[n0][i0]) continue;
            QComponent comp;
            comp.x_min = f.grid.face(i0);
            comp.x_max = f.grid.face(i0 + 1);
            comp.t_min = comp.t_max = f.times[n0];
            std::deque<std::pair<std::size_t, int>> queue{{n0, i0}};
            seen[n0][i0] = 1;
            while (!queue.empty()) {
                const auto [n, i] = queue.front();
                queue.pop_front();
                ++comp.cells;
                comp.x_min = std::min(comp.x_min, i * h);
                comp.x_max = std::max(comp.x_max, (i + 1) * h);
                comp.t_min = std::min(comp.t_min, f.times[n]);
                comp.t_max = std::max(comp.t_max, f.times[n]);
                auto visit = [&](std::size_t nn, int ii) {
                    if (f.q_mask[nn][ii] && !seen[nn][ii]) {
                        seen[nn][ii] = 1;
                        queue.emplace_back(nn, ii);
                    }
                };
                if (i > 0) visit(n, i - 1);
                if (i + 1 < cells) visit(n, i + 1);
                if (n > 0) visit(n - 1, i);
                if (n + 1 < slices) visit(n + 1, i);
            }
            components.push_back(comp);
        }
    }
    return components;
}

QSummary compute_Q(SubsolutionFields& f, const WallSpec& w) {
    const std::size_t slices = f.slices();
    const int cells = f.grid.N;
    QSummary summary;
    summary.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < slices; ++n) {
        bool full = true;
        for (int i = 0; i < cells; ++i) {
            const double slope = f.u[n][i];
            const bool inside = w.omega1_lo < slope && slope < w.omega2_hi;
            f.q_mask[n][i] = inside ? 1 : 0;
            f.margin[n][i] = std::min(slope - w.omega1_lo, w.omega2_hi - slope);
            if (inside) {
                ++summary.q_cells;
                summary.last_time_in_q = f.times[n];
                summary.min_margin = std::min(summary.min_margin, f.margin[n][i]);
            } else {
                full = false;
            }
        }
        if (full && n > 0) summary.full_slice_present = true;
    }
    if (summary.q_cells == 0) summary.min_margin = 0.0;
    summary.touches_initial_time =
        std::any_of(f.q_mask[0].begin(), f.q_mask[0].end(), [](auto c) { return c != 0; });
    summary.bounded_in_time =
        std::none_of(f.q_mask.back().begin(), f.q_mask.back().end(), [](auto c) { return c != 0; });

    summary.components = q_components(f);
    return summary;
}

SubsolutionReport check_strict_subsolution(const SubsolutionFields& f, const WallSpec& w,
                                           const ModifiedFlux& m) {
    SubsolutionReport report;
    report.min_boundary_distance = std::numeric_limits<double>::infinity();
    report.min_flux_margin = std::numeric_limits<double>::infinity();
    // A few hundred ulps of a flux level near 0.1.
    report.allowance = 1e-14;
    const Grid& g = f.grid;
    const double h = g.h();
    const CriticalData& crit = w.branches->crit();
    auto fail = [&](std::size_t n, int i, const std::string& what) {
        if (!report.pass) return;
        report.pass = false;
        std::ostringstream msg;
        msg.precision(17);
        msg << what << " at t=" << f.times[n] << " x=" << g.center(i);
        report.first_failure = msg.str();
    };
    for (std::size_t n = 0; n < f.slices(); ++n) {
        for (int i = 0; i < g.N; ++i) {
            if (!f.in_q(n, i)) continue;
            ++report.cells_checked;
            const double slope = f.u[n][i];
            const double rate = f.rate[n][i];
            if (n > 0) {
                const double diffed = (f.w[n][i] - f.w[n - 1][i]) / (f.times[n] - f.times[n - 1]);
                report.max_wt_residual =
                    std::max(report.max_wt_residual, std::abs(diffed - m.eval(slope)));
            }
            const double vertical = std::min(rate - w.r1, w.r2 - rate);
            double wall = std::numeric_limits<double>::infinity();
            if (slope < crit.s0_minus) wall = eval_rho(w.params, slope) - rate;
            if (slope > crit.s0_plus) wall = rate - eval_rho(w.params, slope);
            const double margin = std::min(vertical, wall);
            report.min_flux_margin = std::min(report.min_flux_margin, margin);
            if (margin <= report.allowance) ++report.marginal_cells;
            if (vertical < -report.allowance) {
                fail(n, i, "w*_t outside (r1, r2)");
            } else if (wall < -report.allowance) {
                fail(n, i, "v*_x outside the walls at level w*_t");
            }
            if (vertical > 0.0) {
                report.min_boundary_distance =
                    std::min(report.min_boundary_distance, w.distance_to_boundary(slope, rate));
            }
            // Faces on both sides of the cell, excluding the domain ends
            // where w* is only one-sided.
            for (int j : {i, i + 1}) {
                if (j == 0 || j == g.N) continue;
                const double dx = (f.w[n][j] - f.w[n][j - 1]) / h;
                const double res = std::abs(dx - f.v[n][j]);
                report.max_wx_residual = std::max(report.max_wx_residual, res);
                if (res > 1e-6 * (1.0 + std::abs(f.v[n][j]))) fail(n, i, "w*_x differs from v*");
            }
        }
    }
    if (report.cells_checked == 0) {
        report.min_boundary_distance = 0.0;
        report.min_flux_margin = 0.0;
    }
    return report;
}

}  // namespace fbf
