#include <doctest.h>

#include <cmath>

#include "fbf/initial_data.hpp"
#include "fbf/weak_form_verifier.hpp"
#include "oracles.hpp"

using namespace fbf;

namespace {

const FluxParams kRef{0.9, 1.0};

FluxFn base_flux() {
    return [](double s) { return eval_rho(kRef, s); };
}

SolveResult classical_run(int n, double t_end = 0.05) {
    const CriticalData c = critical_points(kRef);
    const ModifiedFlux m = build_one_sided(kRef, 0.5 * (0.25 + c.s0_minus), MatchSide::Left);
    const Grid g{1.0, n};
    StepPolicy pol;
    pol.dt_first = pol.dt_max = 0.5 * g.h() * g.h();
    pol.growth = 1.0;
    return solve(m, g, InitialDatum::cosine(0.2, 0.05).sample(g), t_end, pol);
}

SpaceTimeField constant_field(double c, int n, const std::vector<double>& times) {
    SpaceTimeField f;
    f.grid = Grid{2.0, n};
    for (double t : times) f.append(t, std::vector<double>(n, c));
    return f;
}

}  // namespace

TEST_CASE("catalog profiles vanish at the horizon") {
    const auto cat = catalog(8, 0.5, 2.0);
    CHECK(cat.size() == 36);
    for (const TestFunction& tf : cat) {
        CHECK(tf.theta(2.0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(tf.theta(0.5) == doctest::Approx(1.0));
        const double t = 1.3, e = 1e-6;
        const double fd = (tf.theta(t + e) - tf.theta(t - e)) / (2 * e);
        CHECK(tf.theta_dt(t) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(to_string(TimeProfile::QuarterSine) == "quarter_sine");
}

TEST_CASE("constant density has zero residual for the zeroth mode") {
    const SpaceTimeField f = constant_field(0.37, 40, {0.0, 0.1, 0.25, 0.3, 0.7, 1.0});
    const FieldHistory h(f);
    const PiecewiseSlice u0 = h.density(0);
    for (TimeQuadrature rule : {TimeQuadrature::StepConsistent, TimeQuadrature::Trapezoid}) {
        for (const TestFunction& tf : catalog(0, 0.0, 1.0)) {
            CHECK(std::abs(weak_residual(h, u0, tf, base_flux(), rule)) <= 1e-15);
        }
    }
    // Higher modes see a constant flux only through int cos = 0.
    for (const TestFunction& tf : catalog(6, 0.0, 1.0)) {
        CHECK(std::abs(weak_residual(h, u0, tf, base_flux())) <= 1e-13);
    }
}

TEST_CASE("horizon mismatch is rejected") {
    const SpaceTimeField f = constant_field(0.2, 20, {0.0, 0.5, 1.0});
    const FieldHistory h(f);
    TestFunction tf{1, TimeProfile::Linear, 0.0, 2.0};
    CHECK_THROWS_AS(weak_residual(h, h.density(0), tf, base_flux()), std::invalid_argument);
    CHECK_THROWS_AS(weak_functional(h, tf, base_flux(), 2, 1), std::out_of_range);
}

TEST_CASE("classical solver output: residual decays at second order") {
    std::vector<double> worst4, worst8;
    for (int n : {50, 100, 200, 400}) {
        const SolveResult run = classical_run(n);
        const FieldHistory h(run.field);
        worst4.push_back(worst_residual(catalog_residuals(h, base_flux(), 4)));
        worst8.push_back(worst_residual(catalog_residuals(h, base_flux(), 8)));
    }
    for (std::size_t k = 1; k < worst4.size(); ++k) {
        CAPTURE(k);
        const double ratio = worst4[k - 1] / worst4[k];
        CHECK(ratio >= 3.0);
        CHECK(ratio <= 5.0);
        CHECK(std::log2(worst8[k - 1] / worst8[k]) >= 1.8);
    }
}

TEST_CASE("a corrupted field stands out against the classical baseline") {
    const SolveResult run = classical_run(200);
    const double baseline = worst_residual(catalog_residuals(FieldHistory(run.field), base_flux(), 8));
    SpaceTimeField bad = run.field;
    for (auto& s : bad.values) {
        for (int i = 80; i < 120; ++i) s[i] += 0.01;
    }
    const double corrupted = worst_residual(catalog_residuals(FieldHistory(bad), base_flux(), 8));
    CHECK(corrupted >= 10.0 * baseline);
}

TEST_CASE("functional is additive when the time window is split at a slice") {
    const SolveResult run = classical_run(64, 0.2);
    const FieldHistory h(run.field);
    const std::size_t last = h.slices() - 1;
    oracle::Rng rng(3);
    for (const TestFunction& tf : catalog(5, h.time(0), h.time(last))) {
        const auto split = static_cast<std::size_t>(rng.uniform(1.0, static_cast<double>(last)));
        const double whole = weak_functional(h, tf, base_flux(), 0, last);
        const double parts = weak_functional(h, tf, base_flux(), 0, split) +
                             weak_functional(h, tf, base_flux(), split, last);
        REQUIRE(std::abs(parts - whole) <= 1e-13);
    }
}

TEST_CASE("glued runs reproduce a single run") {
    const CriticalData c = critical_points(kRef);
    const ModifiedFlux m = build_one_sided(kRef, 0.5 * (0.25 + c.s0_minus), MatchSide::Left);
    const Grid g{1.0, 64};
    StepPolicy pol;
    pol.dt_first = pol.dt_max = 1e-4;
    pol.growth = 1.0;
    const auto u0 = InitialDatum::cosine(0.2, 0.05).sample(g);
    const SolveResult first = solve(m, g, u0, 0.01, pol);
    const SolveResult second = continue_solve(m, g, first.field.last(), first.field.times.back(), 0.02, pol);

    GluedHistory glued;
    const FieldHistory a(first.field), b(second.field);
    glued.add(&a);
    glued.add(&b);
    CHECK(glued.slices() == a.slices() + b.slices() - 1);
    CHECK(glued.time(a.slices() - 1) == a.time(a.slices() - 1));
    CHECK(glued.time(a.slices()) == b.time(1));

    const std::size_t cut = a.slices() - 1, last = glued.slices() - 1;
    for (const TestFunction& tf : catalog(4, glued.time(0), glued.time(last))) {
        const double whole = weak_functional(glued, tf, base_flux(), 0, last);
        const double lhs = weak_functional(a, tf, base_flux(), 0, a.slices() - 1);
        const double rhs = weak_functional(b, tf, base_flux(), 0, b.slices() - 1);
        REQUIRE(std::abs(lhs + rhs - whole) <= 1e-13);
        REQUIRE(std::abs(weak_functional(glued, tf, base_flux(), 0, cut) - lhs) <= 1e-13);
    }
}

TEST_CASE("property: the mass part of the functional is linear in the density") {
    oracle::Rng rng(17);
    const std::vector<double> times{0.0, 0.05, 0.15, 0.4, 0.6};
    SpaceTimeField f1, f2, mix;
    f1.grid = f2.grid = mix.grid = Grid{1.0, 24};
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (double t : times) {
        std::vector<double> x(24), y(24), z(24);
        for (int i = 0; i < 24; ++i) {
            x[i] = rng.uniform();
            y[i] = rng.uniform();
            z[i] = a * x[i] + b * y[i];
        }
        f1.append(t, x);
        f2.append(t, y);
        mix.append(t, z);
    }
    const FluxFn none = [](double) { return 0.0; };
    const FluxFn linear = [](double s) { return 0.3 * s; };
    for (const FluxFn& flux : {none, linear}) {
        const auto r1 = catalog_residuals(FieldHistory(f1), flux, 6);
        const auto r2 = catalog_residuals(FieldHistory(f2), flux, 6);
        const auto rm = catalog_residuals(FieldHistory(mix), flux, 6);
        for (std::size_t k = 0; k < rm.size(); ++k) {
            REQUIRE(rm[k].value == doctest::Approx(a * r1[k].value + b * r2[k].value).scale(1.0));
        }
    }
}

TEST_CASE("laminate residual shrinks in proportion to the strip width") {
    const ModifiedFlux m = build_two_sided(kRef, 0.098, 0.0995);
    const WallSpec w = make_wall_spec(kRef, 0.098, 0.0995);
    const Grid g{1.0, 400};
    StepPolicy pol;
    pol.dt_first = 1e-6;
    pol.growth = 1.03;
    pol.dt_max = 2e-3;
    const SolveResult run = solve(m, g, InitialDatum::bump(0.11, 0.45, 8).sample(g), 0.4, pol);
    SubsolutionFields f = build_subsolution(run.field, m);
    compute_Q(f, w);

    const FluxFn modified = [&m](double s) { return m.eval(s); };
    const double baseline = worst_residual(catalog_residuals(FieldHistory(run.field), modified, 8));

    std::vector<double> worst;
    for (int div : {2, 4, 8, 16}) {
        LaminateOptions opt;
        opt.delta = g.h() / div;
        opt.seed = 1;
        const LaminateSolution lam = construct(f, w, opt);
        worst.push_back(worst_residual(catalog_residuals(lam, base_flux(), 8)));

        ConclusionInputs in;
        in.case_label = "ii-1";
        in.u = &lam;
        in.expected_mass = 0.11;
        in.flux = base_flux();
        in.fields = &f;
        in.laminate = &lam;
        in.delta = opt.delta;
        in.d0 = w.d0;
        const VerificationReport rep = verify_conclusions(in);
        CHECK(rep.pass());
        CHECK(rep.conservation_error <= 1e-9);
        CHECK(rep.items.size() == 6);
    }
    CHECK(worst.front() > baseline);
    for (std::size_t k = 1; k < worst.size(); ++k) {
        CAPTURE(k);
        CHECK(worst[k - 1] / worst[k] >= 1.5);
        CHECK(worst[k - 1] / worst[k] <= 2.5);
    }
}

TEST_CASE("classical run passes the vacuous conclusion list") {
    const SolveResult run = classical_run(64);
    const FieldHistory h(run.field);
    ConclusionInputs in;
    in.case_label = "i";
    in.u = &h;
    in.expected_mass = 0.2;
    in.flux = base_flux();
    const VerificationReport rep = verify_conclusions(in);
    CHECK(rep.pass());
    REQUIRE(rep.items.size() == 1);
    CHECK(rep.items[0].name == "conservation");
    CHECK(rep.residuals.size() == 36);
    CHECK(conservation_error(h, 0.2) <= 1e-12);
    CHECK(conservation_error(h, 0.21) == doctest::Approx(0.01));
}

TEST_CASE("two-point trace check needs a strictly falling tail maximum") {
    const SolveResult run = classical_run(32);
    const FieldHistory h(run.field);
    ConclusionInputs in;
    in.u = &h;
    in.expected_mass = 0.2;
    in.epoch_distances = {0.02, 0.01, 0.004, 0.001};
    VerificationReport rep = verify_conclusions(in);
    CHECK(rep.pass());
    CHECK(rep.two_point_distance_trace == std::vector<double>{0.02, 0.01, 0.004, 0.001});

    in.epoch_distances = {0.02, 0.01, 0.01, 0.001};
    rep = verify_conclusions(in);
    CHECK_FALSE(rep.pass());
    // A late rise is carried back by the tail maximum.
    in.epoch_distances = {0.02, 0.001, 0.015};
    rep = verify_conclusions(in);
    CHECK(rep.two_point_distance_trace == std::vector<double>{0.02, 0.015, 0.015});
    CHECK_FALSE(rep.pass());
}
