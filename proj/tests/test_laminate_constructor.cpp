#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fbf/initial_data.hpp"
#include "fbf/laminate_constructor.hpp"
#include "oracles.hpp"

using namespace fbf;

namespace {

const FluxParams kRef{0.9, 1.0};
constexpr double kR1 = 0.098;
constexpr double kR2 = 0.0995;

SpaceTimeField constant_field(double c, int n, int slices, double dt) {
    SpaceTimeField f;
    f.grid = Grid{1.0, n};
    for (int k = 0; k < slices; ++k) f.append(k * dt, std::vector<double>(n, c));
    return f;
}

struct BumpFixture {
    ModifiedFlux flux = build_two_sided(kRef, kR1, kR2);
    WallSpec walls = make_wall_spec(kRef, kR1, kR2);
    SpaceTimeField field;
    SubsolutionFields sub;

    BumpFixture() {
        const Grid g{1.0, 400};
        StepPolicy pol;
        pol.dt_first = 1e-6;
        pol.growth = 1.03;
        pol.dt_max = 2e-3;
        field = solve(flux, g, InitialDatum::bump(0.11, 0.45, 8).sample(g), 0.4, pol).field;
        sub = build_subsolution(field, flux);
        compute_Q(sub, walls);
    }
};

const BumpFixture& bump() {
    static const BumpFixture fx;
    return fx;
}

}  // namespace

TEST_CASE("constant subsolution laminates between the two wall values") {
    const ModifiedFlux m = build_two_sided(kRef, kR1, kR2);
    const WallSpec w = make_wall_spec(kRef, kR1, kR2);
    const SpaceTimeField u = constant_field(0.6, 32, 4, 0.05);
    SubsolutionFields f = build_subsolution(u, m);
    compute_Q(f, w);

    LaminateOptions opt;
    opt.delta = f.grid.h() / 4;
    opt.seed = 5;
    const LaminateSolution lam = construct(f, w, opt);

    const double level = m.eval(0.6);
    const double sp = oracle::bisect_rho(0.9, 1.0, level, 0.9388, 1.0);
    const double sm = oracle::bisect_rho(0.9, 1.0, level, 0.0, 0.3945);
    const double lambda = (0.6 - sm) / (sp - sm);
    CHECK(lambda > 0.0);
    CHECK(lambda < 1.0);

    for (std::size_t n = 1; n < lam.slices(); ++n) {
        REQUIRE_FALSE(lam.strips(n).empty());
        for (const StripState& s : lam.strips(n)) {
            REQUIRE(s.level == doctest::Approx(level).epsilon(1e-10));
            REQUIRE(s.lambda == doctest::Approx(lambda).epsilon(1e-8));
        }
        const LaminateSlice sl = lam.materialize(n);
        for (std::size_t j = 0; j < sl.u.size(); ++j) {
            if (sl.kind[j] != IntervalKind::Laminated) continue;
            const bool plus = std::abs(sl.u[j] - sp) <= 1e-9;
            const bool minus = std::abs(sl.u[j] - sm) <= 1e-9;
            REQUIRE((plus || minus));
        }
        // Mean of u over each strip reproduces the target slope.
        const PiecewiseSlice d = lam.density(n);
        for (const StripState& s : lam.strips(n)) {
            double mass = 0.0;
            for (std::size_t j = 0; j < d.u.size(); ++j) {
                const double overlap = std::min(d.x[j + 1], s.hi) - std::max(d.x[j], s.lo);
                if (overlap > 0.0) mass += overlap * d.u[j];
            }
            REQUIRE(mass / (s.hi - s.lo) == doctest::Approx(0.6).epsilon(1e-12));
        }
    }
    const LaminateDefects& def = lam.defects();
    CHECK(def.band_violation_outside_layers == 0.0);
    CHECK(def.boundary_mismatch == 0.0);
    CHECK(def.max_total_mass_error <= 1e-10);
}

TEST_CASE("z equal to z* with an empty Q has no defects") {
    const ModifiedFlux m = build_two_sided(kRef, kR1, kR2);
    const WallSpec w = make_wall_spec(kRef, kR1, kR2);
    SubsolutionFields f = build_subsolution(constant_field(0.1, 32, 4, 0.1), m);
    compute_Q(f, w);
    LaminateOptions opt;
    opt.delta = f.grid.h() / 2;
    const LaminateSolution lam = construct(f, w, opt);
    const LaminateDefects& d = lam.defects();
    CHECK(d.sup_dev == 0.0);
    CHECK(d.wx_mismatch == 0.0);
    CHECK(d.band_violation_measure == 0.0);
    CHECK(d.boundary_mismatch == 0.0);
    CHECK(d.laminated_strip_slices == 0);
}

TEST_CASE("construct rejects bad strip widths and infeasible closeness targets") {
    const BumpFixture& fx = bump();
    LaminateOptions opt;
    opt.delta = 2.0 * fx.sub.grid.h();
    CHECK_THROWS_AS(construct(fx.sub, fx.walls, opt), std::invalid_argument);
    opt.delta = 0.0;
    CHECK_THROWS_AS(construct(fx.sub, fx.walls, opt), std::invalid_argument);

    opt.delta = fx.sub.grid.h() / 2;
    opt.eps = 1e-7;
    try {
        construct(fx.sub, fx.walls, opt);
        FAIL("expected an infeasible closeness target");
    } catch (const InfeasibleLaminateError& e) {
        CHECK(e.achievable_sup_dev > opt.eps);
        CHECK(e.achievable_sup_dev <= opt.delta * fx.walls.d0);
    }
}

TEST_CASE("reference bump laminate: contract and refinement law") {
    const BumpFixture& fx = bump();
    const double h = fx.sub.grid.h();
    std::vector<double> sup, wx;
    for (int div : {2, 4, 8, 16}) {
        CAPTURE(div);
        LaminateOptions opt;
        opt.delta = h / div;
        opt.seed = 1;
        const LaminateSolution lam = construct(fx.sub, fx.walls, opt);
        const LaminateDefects& d = lam.defects();
        CHECK(d.boundary_mismatch == 0.0);
        CHECK(d.sup_dev <= 5.0 * opt.delta * fx.walls.d0);
        CHECK(d.band_violation_outside_layers == 0.0);
        CHECK(d.band_violation_measure <= d.layer_fraction);
        CHECK(d.max_mass_error <= 2.0 * opt.delta * fx.walls.d0);
        CHECK(d.max_total_mass_error <= 1e-10);
        CHECK(d.laminated_strip_slices > 0);

        const OscillationReport osc = oscillation_over_dyadic(lam, fx.sub, opt.delta, fx.walls.d0);
        CHECK(osc.rectangles_tested > 0);
        CHECK(osc.pass);
        CHECK(osc.min_oscillation >= fx.walls.d0 - 1e-9);
        sup.push_back(d.sup_dev);
        wx.push_back(d.wx_mismatch);
    }
    for (std::size_t k = 1; k < sup.size(); ++k) {
        CAPTURE(k);
        CHECK(sup[k - 1] / sup[k] >= 1.6);
        CHECK(sup[k - 1] / sup[k] <= 2.4);
        CHECK(wx[k - 1] / wx[k] >= 1.5);
    }
}

TEST_CASE("seeds give distinct laminates with the same defect bounds") {
    const BumpFixture& fx = bump();
    const double delta = fx.sub.grid.h() / 4;
    const auto sols = distinct_solutions(fx.sub, fx.walls, delta, 0.0, {1, 2, 3});
    REQUIRE(sols.size() == 3);
    for (const auto& s : sols) {
        CHECK(s.defects().sup_dev <= s.eps());
        CHECK(s.defects().band_violation_outside_layers == 0.0);
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            const DifferenceReport diff = compare_on_q(sols[a], sols[b], fx.sub);
            CHECK(diff.fraction >= 0.1);
            CHECK(diff.sup_distance >= fx.walls.d0 / 2);
        }
    }
    CHECK_THROWS_AS(distinct_solutions(fx.sub, fx.walls, delta, 0.0, {7}),
                    std::invalid_argument);
}

TEST_CASE("two seeds on a constant subsolution keep strip means") {
    const ModifiedFlux m = build_two_sided(kRef, kR1, kR2);
    const WallSpec w = make_wall_spec(kRef, kR1, kR2);
    SubsolutionFields f = build_subsolution(constant_field(0.6, 32, 3, 0.05), m);
    compute_Q(f, w);
    const auto sols = distinct_solutions(f, w, f.grid.h() / 2, 0.0, {11, 12});
    CHECK(compare_on_q(sols[0], sols[1], f).fraction >= 0.1);
    for (const auto& s : sols) {
        const PiecewiseSlice d = s.density(2);
        for (const StripState& st : s.strips(2)) {
            double mass = 0.0;
            for (std::size_t j = 0; j < d.u.size(); ++j) {
                const double overlap = std::min(d.x[j + 1], st.hi) - std::max(d.x[j], st.lo);
                if (overlap > 0.0) mass += overlap * d.u[j];
            }
            REQUIRE(mass / (st.hi - st.lo) == doctest::Approx(0.6).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: laminated intervals sit on the walls for random widths and seeds") {
    const BumpFixture& fx = bump();
    oracle::Rng rng(2024);
    const double h = fx.sub.grid.h();
    for (int trial = 0; trial < 4; ++trial) {
        LaminateOptions opt;
        opt.delta = h * rng.uniform(0.15, 1.0);
        opt.seed = rng.gen();
        CAPTURE(opt.delta);
        const LaminateSolution lam = construct(fx.sub, fx.walls, opt);
        for (std::size_t n = 0; n < lam.slices(); n += 7) {
            const LaminateSlice sl = lam.materialize(n);
            double mass = 0.0;
            for (std::size_t j = 0; j < sl.u.size(); ++j) {
                mass += sl.u[j] * (sl.x[j + 1] - sl.x[j]);
                if (sl.kind[j] != IntervalKind::Laminated) continue;
                const bool lower = sl.u[j] >= fx.walls.omega1_lo - 1e-12 &&
                                   sl.u[j] <= fx.walls.omega1_hi + 1e-12;
                const bool upper = sl.u[j] >= fx.walls.omega2_lo - 1e-12 &&
                                   sl.u[j] <= fx.walls.omega2_hi + 1e-12;
                REQUIRE((lower || upper));
            }
            REQUIRE(mass == doctest::Approx(0.11).epsilon(1e-10));
            REQUIRE(sl.v.front() == 0.0);
        }
    }
}
