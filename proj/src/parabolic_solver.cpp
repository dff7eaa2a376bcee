#include "fbf/parabolic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fbf {

double discrete_mass(const std::vector<double>& u, double h) {
    return h * std::accumulate(u.begin(), u.end(), 0.0);
}

namespace {

/// (A psi)_i with zero flux through both boundary faces.
void apply_laplacian(const std::vector<double>& psi, double inv_h2, std::vector<double>& out) {
    const std::size_t n = psi.size();
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        if (i > 0) acc += psi[i - 1] - psi[i];
        if (i + 1 < n) acc += psi[i + 1] - psi[i];
        out[i] = acc * inv_h2;
    }
}

/// Thomas algorithm for sub/diag/super bands; overwrites rhs with the solution.
void solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                       std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct StepOutcome {
    bool converged = false;
    int iterations = 0;
};

/// One implicit Euler step solved by damped Newton. Every full Newton update
/// keeps sum(residual) at zero because the columns of the flux Jacobian sum to
/// zero, so mass is conserved independently of the stopping tolerance.
StepOutcome implicit_step(const ModifiedFlux& m, double inv_h2, double dt,
                          const std::vector<double>& u_old, std::vector<double>& u,
                          const StepPolicy& policy) {
    const std::size_t n = u_old.size();
    std::vector<double> psi(n), lap(n), res(n), slope(n), trial(n);
    std::vector<double> sub(n), diag(n), sup(n);
    auto residual = [&](const std::vector<double>& state, std::vector<double>& r) {
        for (std::size_t i = 0; i < n; ++i) psi[i] = m.eval(state[i], 0);
        apply_laplacian(psi, inv_h2, lap);
        for (std::size_t i = 0; i < n; ++i) r[i] = state[i] - u_old[i] - dt * lap[i];
        return max_abs(r);
    };
    u = u_old;
    double norm = residual(u, res);
    StepOutcome out;
    for (int it = 0; it < policy.newton_max_iter; ++it) {
        if (norm <= policy.newton_tol) {
            out.converged = true;
            return out;
        }
        ++out.iterations;
        for (std::size_t i = 0; i < n; ++i) slope[i] = m.eval(u[i], 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = dt * inv_h2;
            const int neighbours = (i > 0 ? 1 : 0) + (i + 1 < n ? 1 : 0);
            diag[i] = 1.0 + c * neighbours * slope[i];
            sub[i] = i > 0 ? -c * slope[i - 1] : 0.0;
            sup[i] = i + 1 < n ? -c * slope[i + 1] : 0.0;
        }
        std::vector<double> delta(res);
        for (double& d : delta) d = -d;
        solve_tridiagonal(sub, diag, sup, delta);

        double lambda = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = u[i] + delta[i];
            if (target < -1.0) lambda = std::min(lambda, (-1.0 - u[i]) / delta[i] * 0.5);
            if (target > 2.0) lambda = std::min(lambda, (2.0 - u[i]) / delta[i] * 0.5);
        }
        double trial_norm = 0.0;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + lambda * delta[i];
            trial_norm = residual(trial, res);
            if (trial_norm < norm || lambda < 1e-10) break;
            lambda *= 0.5;
        }
        const double step_size = lambda * max_abs(delta);
        u.swap(trial);
        norm = trial_norm;
        // Round-off floor: the update no longer changes the iterate.
        if (step_size <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, max_abs(u)) &&
            norm <= 1e3 * policy.newton_tol) {
            out.converged = true;
            return out;
        }
    }
    out.converged = norm <= policy.newton_tol;
    return out;
}

void explicit_step(const ModifiedFlux& m, double inv_h2, double dt, const std::vector<double>& u_old,
                   std::vector<double>& u) {
    const std::size_t n = u_old.size();
    std::vector<double> psi(n), lap;
    for (std::size_t i = 0; i < n; ++i) psi[i] = m.eval(u_old[i], 0);
    apply_laplacian(psi, inv_h2, lap);
    u.resize(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = u_old[i] + dt * lap[i];
}

/// Shared time loop. `stop` is consulted after every stored slice and ends
/// the run early when it returns true.
SolveResult evolve(const ModifiedFlux& m, const Grid& g, const std::vector<double>& u0,
                   double t_start, double t_end, const StepPolicy& policy,
                   const std::function<bool(const std::vector<double>&)>& stop) {
    g.validate();
    if (u0.size() != static_cast<std::size_t>(g.N)) {
        throw std::invalid_argument("initial slice size does not match the grid");
    }
    const double h = g.h();
    const double inv_h2 = 1.0 / (h * h);
    if (policy.scheme == TimeScheme::ExplicitEuler) {
        const double limit = 0.4 * h * h / m.theta1();
        if (policy.dt_max > limit || policy.dt_first > limit) {
            std::ostringstream msg;
            msg << "explicit step violates the stability bound: dt must be <= " << limit;
            throw CflError(msg.str(), limit);
        }
    }
    SolveResult result;
    result.scheme = policy.scheme;
    result.field.grid = g;
    result.field.append(t_start, u0);
    if (stop && stop(u0)) {
        result.diagnostics = diagnose(result.field, m);
        return result;
    }
    double t = t_start;
    double dt = policy.dt_first;
    std::vector<double> u_old = u0;
    std::vector<double> u;
    long step = 0;
    while (t < t_end) {
        double this_dt = std::min(dt, t_end - t);
        // Avoid a sliver step at the end of the horizon.
        if (t_end - (t + this_dt) < 1e-3 * this_dt) this_dt = t_end - t;
        if (policy.scheme == TimeScheme::ImplicitEuler) {
            StepOutcome outcome = implicit_step(m, inv_h2, this_dt, u_old, u, policy);
            int retries = 0;
            while (!outcome.converged && retries < 20) {
                ++result.diagnostics.rejected_steps;
                this_dt *= 0.25;
                dt = this_dt;
                outcome = implicit_step(m, inv_h2, this_dt, u_old, u, policy);
                ++retries;
            }
            if (!outcome.converged) {
                std::ostringstream msg;
                msg << "Newton iteration failed at step " << step << " (t = " << t << ")";
                throw std::runtime_error(msg.str());
            }
            result.diagnostics.max_newton_iterations =
                std::max(result.diagnostics.max_newton_iterations, outcome.iterations);
        } else {
            explicit_step(m, inv_h2, this_dt, u_old, u);
        }
        for (double x : u) {
            if (!std::isfinite(x)) {
                std::ostringstream msg;
                msg << "non-finite density at step " << step << " (t = " << t << ")";
                throw std::runtime_error(msg.str());
            }
        }
        t = (t_end - (t + this_dt) <= 0.0) ? t_end : t + this_dt;
        ++step;
        result.field.append(t, u);
        u_old.swap(u);
        if (stop && stop(u_old)) break;
        dt = std::min(policy.dt_max, dt * policy.growth);
    }
    const SolverDiagnostics counters = result.diagnostics;
    result.diagnostics = diagnose(result.field, m);
    result.diagnostics.max_newton_iterations = counters.max_newton_iterations;
    result.diagnostics.rejected_steps = counters.rejected_steps;
    return result;
}

}  // namespace

void check_density_range(const Grid& g, const std::vector<double>& u) {
    g.validate();
    if (u.size() != static_cast<std::size_t>(g.N)) {
        throw std::invalid_argument("density size does not match the grid");
    }
    for (double x : u) {
        if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("density outside [0,1]");
    }
}

void check_initial_datum(const Grid& g, const std::vector<double>& u0) {
    check_density_range(g, u0);
    const double tol = 1e-8 * g.h();
    if (std::abs(u0[1] - u0[0]) > tol || std::abs(u0[g.N - 1] - u0[g.N - 2]) > tol) {
        std::ostringstream msg;
        msg << "initial datum is not compatible with zero flux: end differences "
            << u0[1] - u0[0] << ", " << u0[g.N - 1] - u0[g.N - 2] << " exceed " << tol;
        throw std::invalid_argument(msg.str());
    }
}

SolveResult solve(const ModifiedFlux& m, const Grid& g, const std::vector<double>& u0,
                  double t_end, const StepPolicy& policy, double t_start) {
    check_initial_datum(g, u0);
    if (!(t_end >= t_start)) throw std::invalid_argument("t_end precedes t_start");
    return evolve(m, g, u0, t_start, t_end, policy, nullptr);
}

SolveResult continue_solve(const ModifiedFlux& m, const Grid& g, const std::vector<double>& slice,
                           double t_start, double t_end, const StepPolicy& policy) {
    check_density_range(g, slice);
    if (!(t_end >= t_start)) throw std::invalid_argument("t_end precedes t_start");
    return evolve(m, g, slice, t_start, t_end, policy, nullptr);
}

ConditionResult run_until_condition(const ModifiedFlux& m, const Grid& g,
                                    const std::vector<double>& u0, const SliceCondition& cond,
                                    const StepPolicy& policy, double max_time, double t_start) {
    check_initial_datum(g, u0);
    if (!(max_time > 0.0)) max_time = 50.0 * g.L * g.L / m.theta0();
    double closest = std::numeric_limits<double>::infinity();
    bool hit = false;
    auto stop = [&](const std::vector<double>& slice) {
        if (cond.gap) closest = std::min(closest, cond.gap(slice));
        hit = cond.holds(slice);
        return hit;
    };
    ConditionResult out;
    out.run = evolve(m, g, u0, t_start, t_start + max_time, policy, stop);
    if (!hit) {
        std::ostringstream msg;
        msg << "condition '" << cond.description << "' not reached by t = " << t_start + max_time
            << "; closest gap " << closest;
        throw TimeoutError(msg.str(), closest);
    }
    out.t_hit = out.run.field.times.back();
    return out;
}

double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& decay,
                      double trailing_fraction, double floor) {
    std::vector<std::pair<double, double>> pts;
    if (times.empty()) return 0.0;
    const double t0 = times.front();
    const double t_cut = times.back() - trailing_fraction * (times.back() - t0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= t_cut && decay[i] > floor) pts.emplace_back(times[i], std::log(decay[i]));
    }
    if (pts.size() < 2) return 0.0;
    double st = 0.0, sy = 0.0;
    for (auto [t, y] : pts) {
        st += t;
        sy += y;
    }
    st /= pts.size();
    sy /= pts.size();
    double num = 0.0, den = 0.0;
    for (auto [t, y] : pts) {
        num += (t - st) * (y - sy);
        den += (t - st) * (t - st);
    }
    return den > 0.0 ? -num / den : 0.0;
}

double discrete_poincare_constant(const Grid& g) {
    const double h = g.h();
    const double s = std::sin(M_PI / (2.0 * g.N));
    return 4.0 * s * s / (h * h);
}

SolverDiagnostics diagnose(const SpaceTimeField& f, const ModifiedFlux& m) {
    SolverDiagnostics d;
    if (f.slices() == 0) return d;
    const double h = f.grid.h();
    d.mean = discrete_mass(f.values.front(), h) / f.grid.L;
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& u : f.values) {
        d.mass_trace.push_back(discrete_mass(u, h));
        const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
        d.min_trace.push_back(*mn);
        d.max_trace.push_back(*mx);
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
        double dev = 0.0;
        for (double x : u) dev = std::max(dev, std::abs(x - d.mean));
        d.decay_trace.push_back(dev);
    }
    d.s_lower = INFINITY;
    for (int i = 0; i <= 256; ++i) {
        const double s = lo + (hi - lo) * i / 256.0;
        d.s_lower = std::min(d.s_lower, m.eval(std::clamp(s, -1.0, 2.0), 1));
    }
    d.fitted_decay_rate = fit_decay_rate(f.times, d.decay_trace);
    return d;
}

}  // namespace fbf
