#include "fbf/laminate_constructor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace fbf {

namespace {

/// splitmix64 finalizer; mixes the seed and the strip index into the phase
/// order bit so the order depends only on (seed, index).
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool plus_first_for(std::uint64_t seed, std::int64_t index) {
    return (mix(seed ^ mix(static_cast<std::uint64_t>(index))) & 1ULL) != 0;
}

/// Runs of Q cells on slice n, as [first, last] cell indices.
std::vector<std::pair<int, int>> q_blocks(const SubsolutionFields& f, std::size_t n) {
    std::vector<std::pair<int, int>> out;
    const int cells = f.grid.N;
    int i = 0;
    while (i < cells) {
        if (!f.in_q(n, i)) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 < cells && f.in_q(n, j + 1)) ++j;
        out.emplace_back(i, j);
        i = j + 1;
    }
    return out;
}

/// Integral of the strip's v from lo to x (x inside the strip), with v(lo)
/// given.
double strip_v(const StripState& s, double v_lo, double x) {
    const double k = s.kink();
    if (x <= k) return v_lo + (x - s.lo) * s.first_value();
    return v_lo + (k - s.lo) * s.first_value() + (x - k) * s.second_value();
}

double strip_v_integral(const StripState& s, double v_lo, double x) {
    const double k = s.kink();
    const double a1 = s.first_value();
    if (x <= k) {
        const double d = x - s.lo;
        return v_lo * d + 0.5 * a1 * d * d;
    }
    const double d1 = k - s.lo;
    const double vk = v_lo + a1 * d1;
    const double d2 = x - k;
    return v_lo * d1 + 0.5 * a1 * d1 * d1 + vk * d2 + 0.5 * s.second_value() * d2 * d2;
}

struct PointValue {
    double v;
    double w;
};

/// v and w of the laminate at x on slice n; `strip` is the strip containing x
/// or null.
PointValue laminate_point(const SubsolutionFields& f, std::size_t n, const StripState* strip,
                          double x) {
    if (!strip) return {f.v_at(n, x), f.w_at(n, x)};
    const double v_lo = f.v_at(n, strip->lo);
    const double width = strip->hi - strip->lo;
    const double full = strip_v_integral(*strip, v_lo, strip->hi);
    const double corr = strip->w_hi - strip->w_lo - full;
    const double v = x >= strip->hi ? f.v_at(n, strip->hi) : strip_v(*strip, v_lo, x);
    const double w = strip->w_lo + strip_v_integral(*strip, v_lo, x) + (x - strip->lo) / width * corr;
    return {v, w};
}

const StripState* strip_containing(const std::vector<StripState>& strips, double x) {
    auto it = std::upper_bound(strips.begin(), strips.end(), x,
                               [](double value, const StripState& s) { return value < s.lo; });
    if (it == strips.begin()) return nullptr;
    --it;
    return x <= it->hi ? &*it : nullptr;
}

double strip_correction(const SubsolutionFields& f, std::size_t n, const StripState& s) {
    const double v_lo = f.v_at(n, s.lo);
    return s.w_hi - s.w_lo - strip_v_integral(s, v_lo, s.hi);
}

/// Integral of (v - v*) over [a, b] on a materialized slice. Both are
/// piecewise linear on the node set, which contains every coarse face.
double deviation_integral(const LaminateSlice& sl, const SubsolutionFields& f, std::size_t n,
                          double a, double b) {
    a = std::max(a, sl.x.front());
    b = std::min(b, sl.x.back());
    if (!(b > a)) return 0.0;
    auto dev_at = [&](std::size_t j) { return sl.v[j] - f.v_at(n, sl.x[j]); };
    auto lo = std::upper_bound(sl.x.begin(), sl.x.end(), a) - sl.x.begin() - 1;
    double acc = 0.0;
    for (std::size_t j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0));
         j + 1 < sl.x.size() && sl.x[j] < b; ++j) {
        const double x0 = sl.x[j], x1 = sl.x[j + 1];
        const double d0 = dev_at(j), d1 = dev_at(j + 1);
        const double p = std::max(a, x0), q = std::min(b, x1);
        if (!(q > p)) continue;
        const double dp = d0 + (d1 - d0) * (p - x0) / (x1 - x0);
        const double dq = d0 + (d1 - d0) * (q - x0) / (x1 - x0);
        acc += 0.5 * (dp + dq) * (q - p);
    }
    return acc;
}

/// Smallest phase fraction a strip may carry.
constexpr double kMinPhase = 1e-8;

/// Open range of levels r in [r1, r2] with s-(r) < slope < s+(r). Empty
/// (hi <= lo) when the slope lies outside (s-(r1), s+(r2)).
std::pair<double, double> admissible_levels(const WallSpec& w, const FluxParams& p, double slope) {
    double lo = w.r1, hi = w.r2;
    const CriticalData& c = w.branches->crit();
    if (slope <= w.omega1_lo || slope >= w.omega2_hi) return {0.0, 0.0};
    if (slope < c.s0_minus) hi = std::min(hi, eval_rho(p, slope));
    if (slope > c.s0_plus) lo = std::max(lo, eval_rho(p, slope));
    return {lo, hi};
}

std::pair<double, double> admissible_levels(const WallSpec& w, double slope) {
    return admissible_levels(w, w.params, slope);
}

}  // namespace

PiecewiseSlice FieldHistory::density(std::size_t n) const {
    PiecewiseSlice s;
    const Grid& g = field_->grid;
    s.x.resize(g.N + 1);
    for (int j = 0; j <= g.N; ++j) s.x[j] = g.face(j);
    s.u = field_->values[n];
    return s;
}

PiecewiseSlice LaminateSolution::density(std::size_t n) const {
    LaminateSlice sl = materialize(n);
    return {std::move(sl.x), std::move(sl.u)};
}

LaminateSlice LaminateSolution::materialize(std::size_t n) const {
    const SubsolutionFields& f = *fields_;
    const Grid& g = f.grid;
    const auto& strips = strips_[n];
    std::vector<double> pts;
    pts.reserve(g.N + 1 + 3 * strips.size());
    for (int j = 0; j <= g.N; ++j) pts.push_back(g.face(j));
    for (const auto& s : strips) {
        pts.push_back(s.lo);
        pts.push_back(s.kink());
        pts.push_back(s.hi);
    }
    std::sort(pts.begin(), pts.end());
    const double merge_tol = 1e-13 * g.L;
    LaminateSlice sl;
    for (double x : pts) {
        if (sl.x.empty() || x - sl.x.back() > merge_tol) sl.x.push_back(x);
    }
    sl.x.front() = 0.0;
    sl.x.back() = g.L;
    sl.v.resize(sl.x.size());
    sl.w.resize(sl.x.size());
    for (std::size_t j = 0; j < sl.x.size(); ++j) {
        const PointValue pv = laminate_point(f, n, strip_containing(strips, sl.x[j]), sl.x[j]);
        sl.v[j] = pv.v;
        sl.w[j] = pv.w;
    }
    const std::size_t m = sl.x.size() - 1;
    sl.u.resize(m);
    sl.kind.resize(m);
    sl.in_q.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double mid = 0.5 * (sl.x[j] + sl.x[j + 1]);
        const int cell = f.cell_of(mid);
        sl.in_q[j] = f.q_mask[n][cell];
        if (const StripState* s = strip_containing(strips, mid)) {
            sl.kind[j] = IntervalKind::Laminated;
            sl.u[j] = mid < s->kink() ? s->first_value() : s->second_value();
        } else {
            sl.kind[j] = sl.in_q[j] ? IntervalKind::Layer : IntervalKind::Exterior;
            sl.u[j] = f.u[n][cell];
        }
    }
    return sl;
}

LaminateSolution construct(const SubsolutionFields& f, const WallSpec& w,
                           const LaminateOptions& opt) {
    const Grid& g = f.grid;
    const double delta = opt.delta;
    if (!(delta > 0.0) || delta > g.h() * (1.0 + 1e-12)) {
        throw std::invalid_argument("strip width must lie in (0, h]");
    }
    LaminateSolution out;
    out.fields_ = &f;
    out.walls_ = w;
    out.delta_ = delta;
    out.seed_ = opt.seed;
    out.eps_ = opt.eps > 0.0 ? opt.eps : 5.0 * delta * w.d0;
    std::mt19937_64 rng(opt.seed);
    out.phase_ = delta * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    out.strips_.assign(f.slices(), {});

    std::set<std::size_t> frozen(opt.frozen_slices.begin(), opt.frozen_slices.end());
    frozen.insert(0);
    const double phase = out.phase_;
    const double sliver = 0.05 * delta;

    for (std::size_t n = 0; n < f.slices(); ++n) {
        if (frozen.count(n)) continue;
        auto& strips = out.strips_[n];
        for (const auto& [first, last] : q_blocks(f, n)) {
            const double xa = g.face(first), xb = g.face(last + 1);
            const double left = first == 0 ? 0.0 : xa + delta;
            const double right = last == g.N - 1 ? g.L : xb - delta;
            if (!(right > left)) continue;
            const auto k0 = static_cast<std::int64_t>(std::floor((left - phase) / delta)) - 1;
            for (std::int64_t k = k0;; ++k) {
                const double e0 = phase + static_cast<double>(k) * delta;
                if (e0 >= right) break;
                const double lo = std::max(e0, 0.0);
                const double hi = std::min(e0 + delta, g.L);
                if (lo < left - 1e-14 || hi > right + 1e-14 || hi - lo < sliver) continue;
                StripState s;
                s.index = k;
                s.lo = lo;
                s.hi = hi;
                const double slope = (f.v_at(n, hi) - f.v_at(n, lo)) / (hi - lo);
                const auto [adm_lo, adm_hi] = admissible_levels(w, slope);
                if (!(adm_hi > adm_lo)) {
                    ++out.fallbacks_;
                    continue;
                }
                double level = std::clamp(f.wt_mean(n, lo, hi), w.r1, w.r2);
                if (!(level > adm_lo && level < adm_hi)) {
                    level = 0.5 * (adm_lo + adm_hi);
                    ++out.adjusted_;
                }
                auto fraction = [&](double r) {
                    const double sp = w.omega2(r), sm = w.omega1(r);
                    return (slope - sm) / (sp - sm);
                };
                // Where u* hugs the wall the exact fraction can fall below what a
                // double can place inside the strip. Nudge the level toward the
                // middle of its range until the minority phase is representable.
                const double lam = fraction(level);
                const double target = std::clamp(lam, kMinPhase, 1.0 - kMinPhase);
                if (lam != target) {
                    double a = level, b = 0.5 * (adm_lo + adm_hi);
                    if ((fraction(b) - target) * (lam - target) < 0.0) {
                        for (int it = 0; it < 200 && b != a; ++it) {
                            const double mid = 0.5 * (a + b);
                            if ((fraction(mid) - target) * (lam - target) > 0.0) a = mid; else b = mid;
                        }
                        level = b;
                        ++out.adjusted_;
                    }
                }
                s.level = level;
                s.s_plus = w.omega2(level);
                s.s_minus = w.omega1(level);
                s.lambda = (slope - s.s_minus) / (s.s_plus - s.s_minus);
                if (!(s.lambda > 0.0 && s.lambda < 1.0)) {
                    ++out.fallbacks_;
                    continue;
                }
                s.plus_first = plus_first_for(opt.seed, k);
                strips.push_back(s);
            }
        }
        // Edge potentials follow w*, so w_x - v inside a strip is the mean
        // of the sawtooth v* - v and vanishes with the strip width.
        for (StripState& st : strips) {
            st.w_lo = f.w_at(n, st.lo);
            st.w_hi = f.w_at(n, st.hi);
        }
    }
    const LaminateDefects d = measure_defects(out);
    if (d.sup_dev > out.eps_) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "laminate deviation " << d.sup_dev << " exceeds eps " << out.eps_
            << "; shrink the strip width";
        throw InfeasibleLaminateError(msg.str(), d.sup_dev);
    }
    return out;
}

LaminateDefects measure_defects(LaminateSolution& s) {
    const SubsolutionFields& f = *s.fields_;
    const WallSpec& w = s.walls_;
    const double h = f.grid.h();
    LaminateDefects d;
    d.layer_strip_fallbacks = s.fallbacks_;
    d.adjusted_levels = s.adjusted_;
    double q_measure = 0.0, layer_measure = 0.0, violation = 0.0, violation_outside = 0.0;
    double minus_measure = 0.0, plus_measure = 0.0;
    const double total0 = discrete_mass(f.u[0], h);
    const double band_tol = 1e-12;
    auto in_band = [&](double u) {
        const bool minus = u >= w.omega1_lo - band_tol && u <= w.omega1_hi + band_tol;
        const bool plus = u >= w.omega2_lo - band_tol && u <= w.omega2_hi + band_tol;
        return std::pair{minus, plus};
    };
    LaminateSlice previous;
    for (std::size_t n = 0; n < f.slices(); ++n) {
        const auto& strips = s.strips_[n];
        d.laminated_strip_slices += strips.size();
        const LaminateSlice sl = s.materialize(n);
        double mass = 0.0;
        for (std::size_t j = 0; j < sl.u.size(); ++j) {
            const double len = sl.x[j + 1] - sl.x[j];
            mass += sl.u[j] * len;
            const double mid = 0.5 * (sl.x[j] + sl.x[j + 1]);
            const PointValue pm = laminate_point(f, n, strip_containing(strips, mid), mid);
            const double dv = std::max({std::abs(sl.v[j] - f.v_at(n, sl.x[j])),
                                        std::abs(sl.v[j + 1] - f.v_at(n, sl.x[j + 1])),
                                        std::abs(pm.v - f.v_at(n, mid))});
            const double dw = std::max({std::abs(sl.w[j] - f.w_at(n, sl.x[j])),
                                        std::abs(sl.w[j + 1] - f.w_at(n, sl.x[j + 1])),
                                        std::abs(pm.w - f.w_at(n, mid))});
            if (!sl.in_q[j]) {
                d.boundary_mismatch = std::max({d.boundary_mismatch, dv, dw});
                continue;
            }
            d.sup_dev_v = std::max(d.sup_dev_v, dv);
            d.sup_dev_w = std::max(d.sup_dev_w, dw);
            q_measure += len;
            const auto [minus, plus] = in_band(sl.u[j]);
            if (minus) minus_measure += len;
            if (plus) plus_measure += len;
            const bool layer = sl.kind[j] != IntervalKind::Laminated;
            if (layer) layer_measure += len;
            if (!minus && !plus) {
                violation += len;
                if (!layer) violation_outside += len;
            }
        }
        d.max_mass_error = std::max(d.max_mass_error, std::abs(mass - discrete_mass(f.u[n], h)));
        d.max_total_mass_error = std::max(d.max_total_mass_error, std::abs(mass - total0));
        for (const auto& st : strips) {
            d.wx_mismatch = std::max(d.wx_mismatch, std::abs(strip_correction(f, n, st)) / (st.hi - st.lo));
        }
        if (n > 0 && (!strips.empty() || !s.strips_[n - 1].empty())) {
            const double dt = f.times[n] - f.times[n - 1];
            const double width = 2.0 * s.delta_;
            auto probe = [&](double c) {
                const double now = deviation_integral(sl, f, n, c - s.delta_, c + s.delta_);
                const double before = deviation_integral(previous, f, n - 1, c - s.delta_, c + s.delta_);
                d.mollified_vt_deviation =
                    std::max(d.mollified_vt_deviation, std::abs(now - before) / (width * dt));
            };
            for (const auto& st : strips) probe(0.5 * (st.lo + st.hi));
            for (const auto& st : s.strips_[n - 1]) probe(0.5 * (st.lo + st.hi));
        }
        previous = sl;
    }
    d.sup_dev = std::max(d.sup_dev_v, d.sup_dev_w);
    if (q_measure > 0.0) {
        d.band_violation_measure = violation / q_measure;
        d.band_violation_outside_layers = violation_outside / q_measure;
        d.layer_fraction = layer_measure / q_measure;
        d.minus_band_fraction = minus_measure / q_measure;
        d.plus_band_fraction = plus_measure / q_measure;
    }
    s.defects_ = d;
    return d;
}

OscillationReport oscillation_over_dyadic(const DensityHistory& u, const SubsolutionFields& f,
                                          double delta, double d0) {
    OscillationReport rep;
    rep.floor = d0 - 1e-9;
    rep.min_oscillation = std::numeric_limits<double>::infinity();
    const Grid& g = f.grid;
    const double h = g.h();

    for (const QComponent& comp : q_components(f)) {
        const double xspan = comp.x_max - comp.x_min;
        const double tspan = comp.t_max - comp.t_min;
        int levels = 0;
        while (xspan / std::ldexp(1.0, levels + 1) >= 4.0 * delta) ++levels;
        struct Rect {
            bool valid = true;
            bool used = false;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
        };
        std::vector<std::vector<Rect>> rects(levels + 1);
        for (int l = 0; l <= levels; ++l) rects[l].resize(std::size_t(1) << (2 * l));

        for (std::size_t n = 0; n < f.slices(); ++n) {
            const double t = f.times[n];
            if (t < comp.t_min || t > comp.t_max) continue;
            const PiecewiseSlice sl = u.density(n);
            std::vector<int> q_prefix(g.N + 1, 0);
            for (int i = 0; i < g.N; ++i) q_prefix[i + 1] = q_prefix[i] + (f.in_q(n, i) ? 1 : 0);
            for (int l = 0; l <= levels; ++l) {
                const int parts = 1 << l;
                int jt = tspan > 0.0 ? static_cast<int>((t - comp.t_min) / tspan * parts) : 0;
                jt = std::clamp(jt, 0, parts - 1);
                const double wx = xspan / parts;
                for (int ix = 0; ix < parts; ++ix) {
                    Rect& r = rects[l][std::size_t(jt) * parts + ix];
                    if (!r.valid) continue;
                    const double a = comp.x_min + ix * wx, b = a + wx;
                    const int c0 = std::clamp(static_cast<int>(std::floor(a / h + 1e-9)), 0, g.N - 1);
                    const int c1 = std::clamp(static_cast<int>(std::ceil(b / h - 1e-9)), c0 + 1, g.N);
                    if (q_prefix[c1] - q_prefix[c0] != c1 - c0) {
                        r.valid = false;
                        continue;
                    }
                    r.used = true;
                    auto it = std::upper_bound(sl.x.begin(), sl.x.end(), a);
                    std::size_t j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - sl.x.begin() - 1, 0));
                    for (; j < sl.u.size() && sl.x[j] < b; ++j) {
                        if (std::min(b, sl.x[j + 1]) - std::max(a, sl.x[j]) <= 1e-14) continue;
                        r.lo = std::min(r.lo, sl.u[j]);
                        r.hi = std::max(r.hi, sl.u[j]);
                    }
                }
            }
        }
        for (const auto& level : rects) {
            for (const Rect& r : level) {
                if (!r.valid || !r.used) continue;
                ++rep.rectangles_tested;
                const double osc = r.hi - r.lo;
                rep.min_oscillation = std::min(rep.min_oscillation, osc);
                if (osc < rep.floor) rep.pass = false;
            }
        }
    }
    if (rep.rectangles_tested == 0) rep.min_oscillation = 0.0;
    return rep;
}

DifferenceReport compare_on_q(const DensityHistory& a, const DensityHistory& b,
                              const SubsolutionFields& f, double tol) {
    DifferenceReport rep;
    double q_measure = 0.0, differ = 0.0;
    const double h = f.grid.h();
    for (std::size_t n = 0; n < f.slices(); ++n) {
        bool any = false;
        for (int i = 0; i < f.grid.N; ++i) {
            if (f.in_q(n, i)) {
                any = true;
                q_measure += h;
            }
        }
        if (!any) continue;
        const PiecewiseSlice sa = a.density(n), sb = b.density(n);
        std::vector<double> pts;
        pts.reserve(sa.x.size() + sb.x.size());
        std::merge(sa.x.begin(), sa.x.end(), sb.x.begin(), sb.x.end(), std::back_inserter(pts));
        std::size_t ia = 0, ib = 0;
        for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
            const double len = pts[j + 1] - pts[j];
            if (len <= 0.0) continue;
            const double mid = 0.5 * (pts[j] + pts[j + 1]);
            if (!f.in_q(n, f.cell_of(mid))) continue;
            while (ia + 1 < sa.u.size() && sa.x[ia + 1] <= mid) ++ia;
            while (ib + 1 < sb.u.size() && sb.x[ib + 1] <= mid) ++ib;
            const double diff = std::abs(sa.u[ia] - sb.u[ib]);
            if (diff > tol) {
                differ += len;
                rep.sup_distance = std::max(rep.sup_distance, diff);
            }
        }
    }
    if (q_measure > 0.0) rep.fraction = differ / q_measure;
    return rep;
}

std::vector<LaminateSolution> distinct_solutions(const SubsolutionFields& f, const WallSpec& w,
                                                 double delta, double eps,
                                                 const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 2) throw std::invalid_argument("distinct solutions need at least two seeds");
    std::vector<LaminateSolution> out;
    for (std::uint64_t seed : seeds) {
        LaminateOptions opt;
        opt.delta = delta;
        opt.eps = eps;
        opt.seed = seed;
        out.push_back(construct(f, w, opt));
    }
    std::size_t most = 0;
    for (std::size_t n = 0; n < f.slices(); ++n) most = std::max(most, out.front().strips(n).size());
    if (most < 4) throw std::invalid_argument("Q holds fewer than four strips on every slice");
    return out;
}

}  // namespace fbf
