#include "fbf/scenario_orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fbf {

std::string to_string(ScenarioCase c) {
    switch (c) {
        case ScenarioCase::NoBackward: return "i";
        case ScenarioCase::LowMeanDirect: return "ii-1";
        case ScenarioCase::LowMeanStaged: return "ii-2";
        case ScenarioCase::HighMean: return "iii";
        case ScenarioCase::BackwardMean: return "iv";
    }
    return "unknown";
}

ScenarioCase parse_case(const std::string& label) {
    for (ScenarioCase c : {ScenarioCase::NoBackward, ScenarioCase::LowMeanDirect,
                           ScenarioCase::LowMeanStaged, ScenarioCase::HighMean,
                           ScenarioCase::BackwardMean}) {
        if (to_string(c) == label) return c;
    }
    throw std::invalid_argument("unknown case label '" + label + "' (use i, ii-1, ii-2, iii, iv)");
}

DatumStats datum_stats(const std::vector<double>& u0) {
    if (u0.empty()) throw std::invalid_argument("empty initial datum");
    DatumStats s;
    const auto [lo, hi] = std::minmax_element(u0.begin(), u0.end());
    s.min = *lo;
    s.max = *hi;
    s.mean = std::accumulate(u0.begin(), u0.end(), 0.0) / static_cast<double>(u0.size());
    return s;
}

ScenarioCase classify_case(const FluxParams& p, const DatumStats& s) {
    if (!in_fdbdf_region(p)) throw std::domain_error("case analysis needs FDBDF parameters");
    const CriticalData c = critical_points(p);
    if (s.max < c.s0_minus || s.min > c.s0_plus) return ScenarioCase::NoBackward;
    if (s.mean >= c.s0_minus && s.mean <= c.s0_plus) return ScenarioCase::BackwardMean;
    if (s.mean > c.s0_plus) return ScenarioCase::HighMean;
    // For type I, s2- coincides with s0- and the staged range is empty.
    if (s.mean < c.s2_minus || c.model_type == ModelType::TypeI) return ScenarioCase::LowMeanDirect;
    return ScenarioCase::LowMeanStaged;
}

ScenarioCase classify_case(const ScenarioInput& inp) {
    return classify_case(inp.params, datum_stats(inp.sampled_datum()));
}

FluxWindow default_window(const FluxParams& p, ScenarioCase c, double mean) {
    const CriticalData cr = critical_points(p);
    const double r_min = eval_rho(p, cr.s0_plus);
    const double r_star = cr.r_star;
    switch (c) {
        case ScenarioCase::LowMeanDirect:
        case ScenarioCase::LowMeanStaged: {
            const double base = c == ScenarioCase::LowMeanDirect
                                    ? std::max(eval_rho(p, mean), r_min)
                                    : r_min;
            const double gap = r_star - base;
            return {base + 0.25 * gap, r_star - 0.1 * gap};
        }
        case ScenarioCase::HighMean: {
            const double top = std::min(eval_rho(p, mean), r_star);
            const double gap = top - r_min;
            return {r_min + 0.1 * gap, top - 0.25 * gap};
        }
        default:
            throw std::invalid_argument("case " + to_string(c) + " has no single flux window");
    }
}

namespace {

double max_of(const std::vector<double>& u) { return *std::max_element(u.begin(), u.end()); }
double min_of(const std::vector<double>& u) { return *std::min_element(u.begin(), u.end()); }

class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("stage " + stage + ": " + what) {}
};

template <class F>
auto tagged(const std::string& stage, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

double slice_mass(const PiecewiseSlice& s) {
    double m = 0.0;
    for (std::size_t j = 0; j < s.u.size(); ++j) m += s.u[j] * (s.x[j + 1] - s.x[j]);
    return m;
}

void laminate_stage(Stage& st, const WallSpec& walls, const ScenarioInput& inp, bool freeze_last) {
    st.walls = walls;
    st.fields = std::make_unique<SubsolutionFields>(
        build_subsolution(st.run.field, st.flux, time_rule_for(inp.policy.scheme)));
    st.q = compute_Q(*st.fields, walls);
    st.strict = check_strict_subsolution(*st.fields, walls, st.flux);
    st.delta = inp.grid.h() / inp.laminate.strip_divisor;
    if (!inp.build_laminates) return;
    for (std::uint64_t seed : inp.laminate.seeds) {
        LaminateOptions opt;
        opt.delta = st.delta;
        opt.eps = inp.laminate.eps;
        opt.seed = seed;
        if (freeze_last) opt.frozen_slices.push_back(st.run.field.slices() - 1);
        st.laminates.push_back(construct(*st.fields, walls, opt));
    }
}

void finish_stage(Stage& st, int modes) {
    st.classical = std::make_unique<FieldHistory>(st.run.field);
    const ModifiedFlux* m = &st.flux;
    st.baseline_residual = worst_residual(
        catalog_residuals(*st.classical, [m](double s) { return m->eval(s); }, modes));
}

std::unique_ptr<Stage> make_stage(std::string name, ModifiedFlux flux) {
    auto st = std::make_unique<Stage>();
    st->name = std::move(name);
    st->flux = std::move(flux);
    return st;
}

void add_item(VerificationReport& rep, const std::string& prefix, CheckItem item) {
    if (!prefix.empty()) item.name = prefix + "/" + item.name;
    rep.add(std::move(item));
}

void check_solver(VerificationReport& rep, const Stage& st, double mass0, const DatumStats& s) {
    const SolverDiagnostics& d = st.run.diagnostics;
    double drift = 0.0;
    for (double m : d.mass_trace) drift = std::max(drift, std::abs(m - mass0));
    add_item(rep, st.name, {"mass_drift", drift <= 1e-10, drift, 1e-10, "per-step |h sum u - initial|"});
    double excess = 0.0;
    for (std::size_t n = 0; n < d.max_trace.size(); ++n) {
        excess = std::max({excess, d.max_trace[n] - s.max, s.min - d.min_trace[n]});
    }
    add_item(rep, st.name, {"maximum_principle", excess <= 1e-12, excess, 1e-12,
                            "largest excursion outside [min u0, max u0]"});
}

void check_laminated_stage(VerificationReport& rep, const Stage& st, double mass0, int modes,
                           bool require_distinct) {
    add_item(rep, st.name, {"strict_subsolution", st.strict.pass, st.strict.min_boundary_distance, 0.0,
                            st.strict.first_failure.empty() ? "all Q cells strictly inside"
                                                            : st.strict.first_failure});
    for (std::size_t k = 0; k < st.laminates.size(); ++k) {
        ConclusionInputs in;
        in.case_label = st.name;
        in.u = &st.laminates[k];
        in.expected_mass = mass0;
        in.max_mode = modes;
        in.fields = st.fields.get();
        in.laminate = &st.laminates[k];
        in.delta = st.delta;
        in.d0 = st.walls->d0;
        const VerificationReport r = verify_conclusions(in);
        for (const CheckItem& item : r.items) {
            add_item(rep, st.name + "/seed" + std::to_string(st.laminates[k].seed()), item);
        }
    }
    if (require_distinct && st.laminates.size() >= 2) {
        double worst = 1.0, sup = 0.0;
        for (std::size_t a = 0; a < st.laminates.size(); ++a) {
            for (std::size_t b = a + 1; b < st.laminates.size(); ++b) {
                const DifferenceReport d = compare_on_q(st.laminates[a], st.laminates[b], *st.fields);
                worst = std::min(worst, d.fraction);
                sup = std::max(sup, d.sup_distance);
            }
        }
        std::ostringstream detail;
        detail << "smallest pairwise fraction of |Q| where seeds differ; largest gap " << sup;
        add_item(rep, st.name, {"seeds_distinct", worst >= 0.1, worst, 0.1, detail.str()});
    }
}

void check_q_shape(VerificationReport& rep, const Stage& st) {
    add_item(rep, st.name, {"q_nonempty", st.q.q_cells > 0, static_cast<double>(st.q.q_cells), 1.0,
                            "cells of Q over all slices"});
    add_item(rep, st.name, {"q_bounded_in_time", st.q.bounded_in_time, st.q.last_time_in_q,
                            st.t_end(), "last time with a Q cell, against the horizon"});
    add_item(rep, st.name, {"q_meets_initial_time", st.q.touches_initial_time,
                            st.q.touches_initial_time ? 1.0 : 0.0, 1.0, "Q has cells at t = 0"});
}

}  // namespace

EpochPlan plan_epochs(const ScenarioInput& inp, double r0, int n_epochs) {
    if (n_epochs < 2) throw std::invalid_argument("an epoch plan needs at least two epochs");
    const CriticalData c = critical_points(inp.params);
    const double r_min = eval_rho(inp.params, c.s0_plus);
    if (!(r0 > r_min && r0 < c.r_star)) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "r0 = " << r0 << " is outside (rho(s0+), r*) = (" << r_min << ", " << c.r_star << ")";
        throw std::invalid_argument(msg.str());
    }
    EpochPlan plan;
    plan.r0 = r0;
    plan.c1 = std::min(inp.epochs.c1, 0.9 * (r0 - r_min));
    plan.c2 = std::min(inp.epochs.c2, 0.9 * (c.r_star - r0));
    if (!(plan.c1 > 0.0 && plan.c2 > 0.0)) throw std::invalid_argument("epoch offsets must be positive");
    for (int k = 1; k <= n_epochs; ++k) plan.windows.push_back({r0 - plan.c1 / k, r0 + plan.c2 / k});

    const ModifiedFlux first = build_two_sided(inp.params, plan.windows[0].r1, plan.windows[0].r2);
    const BranchTable table(inp.params);
    const double lo = table.s_minus(r0), hi = table.s_plus(r0);
    const SliceCondition cond{
        [lo, hi](const std::vector<double>& u) { return min_of(u) > lo && max_of(u) < hi; },
        [lo, hi](const std::vector<double>& u) { return std::max(lo - min_of(u), max_of(u) - hi); },
        "s-(r0) < u < s+(r0)"};
    plan.t_hit = run_until_condition(first, inp.grid, inp.sampled_datum(), cond, inp.policy).t_hit;
    const double t1 = std::max(plan.t_hit, inp.epochs.length);
    for (int j = 0; j < n_epochs; ++j) plan.ends.push_back(t1 + j * inp.epochs.length);
    return plan;
}

ScenarioBundle run_scenario(const ScenarioInput& inp) {
    inp.params.validate();
    inp.grid.validate();
    if (inp.laminate.strip_divisor < 1) throw std::invalid_argument("strip_divisor must be >= 1");
    ScenarioBundle b;
    b.input = inp;
    const std::vector<double> u0 = inp.sampled_datum();
    check_initial_datum(inp.grid, u0);
    b.stats = datum_stats(u0);
    b.label = inp.case_override ? *inp.case_override : classify_case(inp.params, b.stats);
    b.crit = critical_points(inp.params);
    b.initial_mass = discrete_mass(u0, inp.grid.h());
    const FluxParams& p = inp.params;
    const int modes = inp.catalog_modes;
    VerificationReport& rep = b.report;
    rep.case_label = to_string(b.label);
    rep.catalog_modes = modes;

    auto window_for = [&](ScenarioCase c) {
        FluxWindow w = (inp.r1 && inp.r2) ? FluxWindow{*inp.r1, *inp.r2}
                                          : default_window(p, c, b.stats.mean);
        if (inp.r1 && !inp.r2) w.r1 = *inp.r1;
        if (inp.r2 && !inp.r1) w.r2 = *inp.r2;
        return w;
    };

    switch (b.label) {
        case ScenarioCase::NoBackward: {
            const bool lower = b.stats.max < b.crit.s0_minus;
            auto st = tagged("classical", [&] {
                ModifiedFlux m = lower ? build_one_sided(p, 0.5 * (b.stats.max + b.crit.s0_minus),
                                                         MatchSide::Left)
                                       : build_one_sided(p, 0.5 * (b.stats.min + b.crit.s0_plus),
                                                         MatchSide::Right);
                auto s = make_stage("classical", std::move(m));
                s->run = solve(s->flux, inp.grid, u0, inp.t_end, inp.policy);
                return s;
            });
            b.stages.push_back(std::move(st));
            break;
        }
        case ScenarioCase::LowMeanDirect:
        case ScenarioCase::HighMean: {
            const FluxWindow win = window_for(b.label);
            auto st = tagged("laminated", [&] {
                auto s = make_stage("laminated", build_two_sided(p, win.r1, win.r2));
                s->run = solve(s->flux, inp.grid, u0, inp.t_end, inp.policy);
                laminate_stage(*s, make_wall_spec(p, win.r1, win.r2), inp, false);
                return s;
            });
            b.stages.push_back(std::move(st));
            break;
        }
        case ScenarioCase::LowMeanStaged: {
            const FluxWindow win = window_for(b.label);
            const double threshold = 0.5 * (b.stats.mean + b.crit.s0_minus);
            auto first = tagged("stage-1", [&] {
                auto s = make_stage("stage-1", build_two_sided(p, win.r1, win.r2));
                const SliceCondition cond{
                    [threshold](const std::vector<double>& u) { return max_of(u) <= threshold; },
                    [threshold](const std::vector<double>& u) { return max_of(u) - threshold; },
                    "max u <= (mean + s0-) / 2"};
                s->run = run_until_condition(s->flux, inp.grid, u0, cond, inp.policy).run;
                laminate_stage(*s, make_wall_spec(p, win.r1, win.r2), inp, true);
                return s;
            });
            auto second = tagged("stage-2", [&] {
                auto s = make_stage("stage-2", build_one_sided(p, threshold, MatchSide::Left));
                const double t1 = first->t_end();
                s->run = continue_solve(s->flux, inp.grid, first->run.field.last(), t1,
                                        t1 + inp.t_end, inp.policy);
                return s;
            });
            b.stages.push_back(std::move(first));
            b.stages.push_back(std::move(second));
            break;
        }
        case ScenarioCase::BackwardMean: {
            const double r_min = eval_rho(p, b.crit.s0_plus);
            const double r0 = inp.epochs.r0 ? *inp.epochs.r0 : 0.5 * (r_min + b.crit.r_star);
            b.plan = tagged("epoch-plan", [&] { return plan_epochs(inp, r0, inp.epochs.count); });
            for (std::size_t e = 0; e < b.plan->windows.size(); ++e) {
                const std::string name = "epoch-" + std::to_string(e + 1);
                const FluxWindow win = b.plan->windows[e];
                auto st = tagged(name, [&] {
                    auto s = make_stage(name, build_two_sided(p, win.r1, win.r2));
                    if (e == 0) {
                        s->run = solve(s->flux, inp.grid, u0, b.plan->ends[0], inp.policy);
                    } else {
                        s->run = continue_solve(s->flux, inp.grid, b.stages.back()->run.field.last(),
                                                b.plan->start_of(e), b.plan->ends[e], inp.policy);
                    }
                    laminate_stage(*s, make_wall_spec(p, win.r1, win.r2), inp, true);
                    return s;
                });
                b.stages.push_back(std::move(st));
            }
            break;
        }
    }
    for (auto& st : b.stages) finish_stage(*st, modes);

    // Whole-horizon histories and their residuals.
    std::size_t n_hist = 1;
    for (const auto& st : b.stages) n_hist = std::max(n_hist, st->laminates.size());
    const FluxFn base = [p](double s) { return eval_rho(p, s); };
    for (std::size_t k = 0; k < n_hist; ++k) {
        auto g = std::make_unique<GluedHistory>();
        for (const auto& st : b.stages) {
            if (st->laminates.empty()) {
                g->add(st->classical.get());
            } else {
                g->add(&st->laminates[k]);
            }
        }
        ConclusionInputs in;
        in.case_label = rep.case_label;
        in.u = g.get();
        in.expected_mass = b.initial_mass;
        in.flux = base;
        in.max_mode = modes;
        const VerificationReport r = verify_conclusions(in);
        const std::string prefix = n_hist > 1 ? "history" + std::to_string(k) : "history";
        for (const CheckItem& item : r.items) add_item(rep, prefix, item);
        if (k == 0) rep.residuals = r.residuals;
        b.worst_residuals.push_back(r.worst_residual);
        rep.worst_residual = std::max(rep.worst_residual, r.worst_residual);
        rep.conservation_error = std::max(rep.conservation_error, r.conservation_error);
        b.histories.push_back(std::move(g));
    }
    for (const auto& st : b.stages) {
        rep.baseline_residual = std::max(rep.baseline_residual, st->baseline_residual);
    }

    for (const auto& st : b.stages) check_solver(rep, *st, b.initial_mass, b.stats);

    switch (b.label) {
        case ScenarioCase::NoBackward: {
            const Stage& st = *b.stages.front();
            const SolverDiagnostics& d = st.run.diagnostics;
            const bool lower = b.stats.max < b.crit.s0_minus;
            const double reach = lower ? max_of(d.max_trace) - b.crit.s0_minus
                                       : b.crit.s0_plus - *std::min_element(d.min_trace.begin(),
                                                                            d.min_trace.end());
            add_item(rep, st.name, {"stays_forward", reach < 0.0, reach, 0.0,
                                    "signed distance into the backward range"});
            add_item(rep, st.name, {"approaches_mean", d.decay_trace.back() <= d.decay_trace.front(),
                                    d.decay_trace.back(), d.decay_trace.front(),
                                    "final against initial max |u - mean|"});
            break;
        }
        case ScenarioCase::LowMeanDirect:
        case ScenarioCase::HighMean: {
            const Stage& st = *b.stages.front();
            check_q_shape(rep, st);
            check_laminated_stage(rep, st, b.initial_mass, modes, true);
            break;
        }
        case ScenarioCase::LowMeanStaged: {
            const Stage& first = *b.stages[0];
            const Stage& second = *b.stages[1];
            add_item(rep, first.name, {"q_nonempty", first.q.q_cells > 0,
                                       static_cast<double>(first.q.q_cells), 1.0, "cells of Q"});
            check_laminated_stage(rep, first, b.initial_mass, modes, true);
            const double threshold = 0.5 * (b.stats.mean + b.crit.s0_minus);
            const double top = max_of(second.run.diagnostics.max_trace);
            add_item(rep, second.name, {"stays_below_threshold", top <= threshold + 1e-12, top,
                                        threshold, "max u after the switch"});
            break;
        }
        case ScenarioCase::BackwardMean: {
            for (std::size_t e = 0; e < b.stages.size(); ++e) {
                const Stage& st = *b.stages[e];
                check_laminated_stage(rep, st, b.initial_mass, modes, false);
                if (e >= 1) {
                    const std::size_t full = st.fields->slices() * static_cast<std::size_t>(inp.grid.N);
                    add_item(rep, st.name, {"q_full_strip", st.q.q_cells == full,
                                            static_cast<double>(st.q.q_cells),
                                            static_cast<double>(full), "Q cells against all cells"});
                }
                if (!st.laminates.empty()) {
                    b.epoch_distances.push_back(two_point_distance(st.laminates.front(), b.plan->r0));
                }
                if (e + 1 < b.stages.size() && !st.laminates.empty() &&
                    !b.stages[e + 1]->laminates.empty()) {
                    const LaminateSolution& next = b.stages[e + 1]->laminates.front();
                    const double before = slice_mass(st.laminates.front().density(st.laminates.front().slices() - 2));
                    const double after = slice_mass(next.density(std::min<std::size_t>(1, next.slices() - 1)));
                    const double jump = std::abs(after - before);
                    add_item(rep, st.name, {"mass_across_epoch_end", jump <= 1e-9, jump, 1e-9,
                                            "laminate mass just before and just after the epoch end"});
                }
            }
            if (!b.epoch_distances.empty()) {
                ConclusionInputs in;
                in.u = b.histories.front().get();
                in.expected_mass = b.initial_mass;
                in.epoch_distances = b.epoch_distances;
                const VerificationReport r = verify_conclusions(in);
                rep.two_point_distance_trace = r.two_point_distance_trace;
                for (const CheckItem& item : r.items) {
                    if (item.name == "two_point_trace_decreasing") add_item(rep, "epochs", item);
                }
            }
            break;
        }
    }
    return b;
}

}  // namespace fbf
