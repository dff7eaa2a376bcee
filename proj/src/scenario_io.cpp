#include "fbf/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace fbf {

using nlohmann::json;

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"model", "alpha", "0.9", "adhesion coefficient in [0,1]"},
        {"model", "beta", "1", "volume-filling coefficient in [0,1]"},
        {"model", "datum", "bump", "initial density: constant, cosine, bump or samples"},
        {"model", "mean", "0.11", "mean of the initial density"},
        {"model", "peak", "0.45", "bump: value at the centre (below mean gives a dip)"},
        {"model", "power", "8", "bump: profile sin(pi x / L)^(2 power)"},
        {"model", "amplitude", "0.05", "cosine: amplitude of cos(mode pi x / L)"},
        {"model", "mode", "1", "cosine: wave number"},
        {"model", "samples_file", "", "samples: file of N cell values (whitespace or commas)"},
        {"model", "case", "auto", "auto or one of i, ii-1, ii-2, iii, iv"},
        {"model", "r1", "", "lower flux level of the window (cases ii-1, ii-2, iii)"},
        {"model", "r2", "", "upper flux level of the window"},
        {"grid", "L", "1", "habitat length"},
        {"grid", "N", "200", "number of cells"},
        {"solver", "scheme", "implicit", "implicit or explicit Euler"},
        {"solver", "t_end", "0.4", "horizon; case ii-2 uses it for the classical continuation"},
        {"solver", "dt_first", "1e-6", "first step"},
        {"solver", "growth", "1.03", "geometric step growth factor"},
        {"solver", "dt_max", "2e-3", "largest step"},
        {"solver", "newton_tol", "1e-12", "Newton residual tolerance"},
        {"solver", "newton_max_iter", "50", "Newton iteration cap"},
        {"solver", "catalog_modes", "8", "cosine modes of the weak-form test catalog"},
        {"laminate", "enabled", "true", "build laminates on windowed stages"},
        {"laminate", "strip_divisor", "2", "strip width is h / strip_divisor"},
        {"laminate", "eps", "0", "closeness target; 0 selects 5 delta d0"},
        {"laminate", "seeds", "1,2,3", "comma-separated seeds, one laminate each"},
        {"laminate", "csv_every", "10", "slice stride of the laminate CSV dumps"},
        {"epochs", "r0", "", "limit flux level of case iv; default mid (rho(s0+), r*)"},
        {"epochs", "count", "4", "number of epochs"},
        {"epochs", "length", "1", "epoch length; also the floor of the first epoch end"},
        {"epochs", "c1", "0.001", "lower window offset, r1k = r0 - c1 / k"},
        {"epochs", "c2", "0.0008", "upper window offset, r2k = r0 + c2 / k"},
    };
    return keys;
}

namespace {

double to_double(const std::string& where, const std::string& text) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
        throw std::invalid_argument(where + ": expected a number, got '" + text + "'");
    }
    return v;
}

long to_long(const std::string& where, const std::string& text) {
    long v = 0;
    const char* b = text.data();
    const char* e = b + text.size();
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
        throw std::invalid_argument(where + ": expected an integer, got '" + text + "'");
    }
    return v;
}

bool to_bool(const std::string& where, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw std::invalid_argument(where + ": expected true or false, got '" + text + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<double> read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("model.samples_file: cannot open '" + path + "'");
    std::vector<double> out;
    std::string token;
    while (in >> token) {
        std::stringstream parts(token);
        std::string piece;
        while (std::getline(parts, piece, ',')) {
            if (!trim(piece).empty()) out.push_back(to_double("model.samples_file", trim(piece)));
        }
    }
    return out;
}

/// Collected datum keys, resolved once all overrides are in.
struct DatumSpec {
    std::string kind = "bump";
    double mean = 0.11;
    double peak = 0.45;
    int power = 8;
    double amplitude = 0.05;
    int mode = 1;
    std::string samples_file;
};

void set_key(ScenarioInput& inp, DatumSpec& d, const std::string& section, const std::string& key,
             const std::string& raw) {
    const std::string where = section + "." + key;
    const std::string value = trim(raw);
    if (section == "model") {
        if (key == "alpha") return void(inp.params.alpha = to_double(where, value));
        if (key == "beta") return void(inp.params.beta = to_double(where, value));
        if (key == "datum") {
            if (value != "constant" && value != "cosine" && value != "bump" && value != "samples") {
                throw std::invalid_argument(where + ": unknown datum '" + value + "'");
            }
            return void(d.kind = value);
        }
        if (key == "mean") return void(d.mean = to_double(where, value));
        if (key == "peak") return void(d.peak = to_double(where, value));
        if (key == "power") return void(d.power = static_cast<int>(to_long(where, value)));
        if (key == "amplitude") return void(d.amplitude = to_double(where, value));
        if (key == "mode") return void(d.mode = static_cast<int>(to_long(where, value)));
        if (key == "samples_file") return void(d.samples_file = value);
        if (key == "case") {
            if (value == "auto") return void(inp.case_override.reset());
            return void(inp.case_override = parse_case(value));
        }
        if (key == "r1") return void(inp.r1 = to_double(where, value));
        if (key == "r2") return void(inp.r2 = to_double(where, value));
    } else if (section == "grid") {
        if (key == "L") return void(inp.grid.L = to_double(where, value));
        if (key == "N") return void(inp.grid.N = static_cast<int>(to_long(where, value)));
    } else if (section == "solver") {
        if (key == "scheme") {
            if (value == "implicit") return void(inp.policy.scheme = TimeScheme::ImplicitEuler);
            if (value == "explicit") return void(inp.policy.scheme = TimeScheme::ExplicitEuler);
            throw std::invalid_argument(where + ": expected implicit or explicit");
        }
        if (key == "t_end") return void(inp.t_end = to_double(where, value));
        if (key == "dt_first") return void(inp.policy.dt_first = to_double(where, value));
        if (key == "growth") return void(inp.policy.growth = to_double(where, value));
        if (key == "dt_max") return void(inp.policy.dt_max = to_double(where, value));
        if (key == "newton_tol") return void(inp.policy.newton_tol = to_double(where, value));
        if (key == "newton_max_iter") {
            return void(inp.policy.newton_max_iter = static_cast<int>(to_long(where, value)));
        }
        if (key == "catalog_modes") return void(inp.catalog_modes = static_cast<int>(to_long(where, value)));
    } else if (section == "laminate") {
        if (key == "enabled") return void(inp.build_laminates = to_bool(where, value));
        if (key == "strip_divisor") {
            return void(inp.laminate.strip_divisor = static_cast<int>(to_long(where, value)));
        }
        if (key == "eps") return void(inp.laminate.eps = to_double(where, value));
        if (key == "seeds") {
            inp.laminate.seeds.clear();
            std::stringstream parts(value);
            std::string piece;
            while (std::getline(parts, piece, ',')) {
                const long s = to_long(where, trim(piece));
                if (s < 0) throw std::invalid_argument(where + ": seeds must be nonnegative");
                inp.laminate.seeds.push_back(static_cast<std::uint64_t>(s));
            }
            if (inp.laminate.seeds.empty()) throw std::invalid_argument(where + ": no seeds given");
            return;
        }
        if (key == "csv_every") return void(inp.laminate.csv_every = static_cast<int>(to_long(where, value)));
    } else if (section == "epochs") {
        if (key == "r0") return void(inp.epochs.r0 = to_double(where, value));
        if (key == "count") return void(inp.epochs.count = static_cast<int>(to_long(where, value)));
        if (key == "length") return void(inp.epochs.length = to_double(where, value));
        if (key == "c1") return void(inp.epochs.c1 = to_double(where, value));
        if (key == "c2") return void(inp.epochs.c2 = to_double(where, value));
    } else {
        throw std::invalid_argument("unknown section [" + section + "]");
    }
    throw std::invalid_argument("unknown key " + where);
}

InitialDatum resolve_datum(const DatumSpec& d) {
    if (d.kind == "constant") return InitialDatum::constant(d.mean);
    if (d.kind == "cosine") return InitialDatum::cosine(d.mean, d.amplitude, d.mode);
    if (d.kind == "samples") {
        if (d.samples_file.empty()) throw std::invalid_argument("model.samples_file is required");
        return InitialDatum::from_samples(read_samples(d.samples_file));
    }
    return InitialDatum::bump(d.mean, d.peak, d.power);
}

DatumSpec spec_of(const InitialDatum& u) {
    DatumSpec d;
    d.mean = u.mean;
    switch (u.kind) {
        case InitialDatum::Kind::Constant: d.kind = "constant"; break;
        case InitialDatum::Kind::Cosine:
            d.kind = "cosine";
            d.amplitude = u.amplitude;
            d.mode = u.mode;
            break;
        case InitialDatum::Kind::Bump:
            d.kind = "bump";
            d.peak = u.amplitude;
            d.power = u.power;
            break;
        case InitialDatum::Kind::Samples: d.kind = "samples"; break;
    }
    return d;
}

void check_settings(const ScenarioInput& inp) {
    inp.params.validate();
    inp.grid.validate();
    if (!(inp.t_end > 0.0)) throw std::invalid_argument("solver.t_end must be positive");
    if (!(inp.policy.dt_first > 0.0 && inp.policy.dt_max >= inp.policy.dt_first)) {
        throw std::invalid_argument("solver.dt_first must be positive and at most dt_max");
    }
    if (!(inp.policy.growth >= 1.0)) throw std::invalid_argument("solver.growth must be >= 1");
    if (inp.catalog_modes < 0) throw std::invalid_argument("solver.catalog_modes must be >= 0");
    if (inp.laminate.strip_divisor < 1) throw std::invalid_argument("laminate.strip_divisor must be >= 1");
    if (inp.laminate.csv_every < 1) throw std::invalid_argument("laminate.csv_every must be >= 1");
    if (inp.epochs.count < 2) throw std::invalid_argument("epochs.count must be >= 2");
    if (!(inp.epochs.length > 0.0)) throw std::invalid_argument("epochs.length must be positive");
}

std::string number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json solver_json(const Stage& st, double mass0) {
    const SolverDiagnostics& d = st.run.diagnostics;
    double drift = 0.0;
    for (double m : d.mass_trace) drift = std::max(drift, std::abs(m - mass0));
    return {{"slices", st.run.field.slices()},
            {"t_begin", st.t_begin()},
            {"t_end", st.t_end()},
            {"mass_drift", drift},
            {"min", *std::min_element(d.min_trace.begin(), d.min_trace.end())},
            {"max", *std::max_element(d.max_trace.begin(), d.max_trace.end())},
            {"final_distance_to_mean", d.decay_trace.back()},
            {"fitted_decay_rate", d.fitted_decay_rate},
            {"max_newton_iterations", d.max_newton_iterations},
            {"rejected_steps", d.rejected_steps}};
}

json flux_json(const ModifiedFlux& m) {
    return {{"kind", to_string(m.kind())}, {"r1", m.r1()},         {"r2", m.r2()},
            {"a_left", m.a_left()},       {"a_right", m.a_right()}, {"theta0", m.theta0()},
            {"theta1", m.theta1()},       {"blend_fraction", m.blend_fraction()}};
}

json defects_json(const LaminateDefects& d) {
    return {{"sup_dev", d.sup_dev},
            {"sup_dev_v", d.sup_dev_v},
            {"sup_dev_w", d.sup_dev_w},
            {"wx_mismatch", d.wx_mismatch},
            {"band_violation_measure", d.band_violation_measure},
            {"layer_fraction", d.layer_fraction},
            {"band_violation_outside_layers", d.band_violation_outside_layers},
            {"boundary_mismatch", d.boundary_mismatch},
            {"minus_band_fraction", d.minus_band_fraction},
            {"plus_band_fraction", d.plus_band_fraction},
            {"max_mass_error", d.max_mass_error},
            {"max_total_mass_error", d.max_total_mass_error},
            {"mollified_vt_deviation", d.mollified_vt_deviation},
            {"mollified_vt_is_surrogate", true},
            {"laminated_strip_slices", d.laminated_strip_slices},
            {"layer_strip_fallbacks", d.layer_strip_fallbacks},
            {"adjusted_levels", d.adjusted_levels}};
}

json stage_json(const Stage& st, double mass0) {
    json j = {{"name", st.name},
              {"flux", flux_json(st.flux)},
              {"solver", solver_json(st, mass0)},
              {"baseline_residual", st.baseline_residual}};
    if (st.walls) {
        j["window"] = {{"r1", st.walls->r1},
                       {"r2", st.walls->r2},
                       {"s_minus_r1", st.walls->omega1_lo},
                       {"s_minus_r2", st.walls->omega1_hi},
                       {"s_plus_r1", st.walls->omega2_lo},
                       {"s_plus_r2", st.walls->omega2_hi},
                       {"d0", st.walls->d0}};
        json comps = json::array();
        for (const QComponent& c : st.q.components) {
            comps.push_back({{"cells", c.cells},
                             {"x_min", c.x_min},
                             {"x_max", c.x_max},
                             {"t_min", c.t_min},
                             {"t_max", c.t_max}});
        }
        j["q"] = {{"cells", st.q.q_cells},
                  {"components", comps},
                  {"touches_initial_time", st.q.touches_initial_time},
                  {"full_slice_present", st.q.full_slice_present},
                  {"bounded_in_time", st.q.bounded_in_time},
                  {"last_time_in_q", st.q.last_time_in_q},
                  {"min_margin", st.q.min_margin}};
        j["strict_subsolution"] = {{"pass", st.strict.pass},
                                   {"cells_checked", st.strict.cells_checked},
                                   {"first_failure", st.strict.first_failure},
                                   {"max_wx_residual", st.strict.max_wx_residual},
                                   {"max_wt_residual", st.strict.max_wt_residual},
                                   {"min_boundary_distance", st.strict.min_boundary_distance},
                                   {"min_flux_margin", st.strict.min_flux_margin},
                                   {"marginal_cells", st.strict.marginal_cells},
                                   {"allowance", st.strict.allowance}};
        json lams = json::array();
        for (const LaminateSolution& l : st.laminates) {
            lams.push_back({{"seed", l.seed()},
                            {"strip_width", l.strip_width()},
                            {"phase", l.phase()},
                            {"eps", l.eps()},
                            {"defects", defects_json(l.defects())}});
        }
        j["laminates"] = lams;
    }
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_piecewise(std::ostream& out, double t, const PiecewiseSlice& s) {
    const std::string ts = number(t);
    for (std::size_t j = 0; j < s.u.size(); ++j) {
        out << ts << ',' << number(s.x[j]) << ',' << number(s.u[j]) << '\n';
    }
}

}  // namespace

ScenarioInput parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ScenarioInput inp;
    DatumSpec d;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) set_key(inp, d, section, key, value.data());
    }
    inp.datum = resolve_datum(d);
    check_settings(inp);
    return inp;
}

ScenarioInput load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    return parse_config(in);
}

void apply_override(ScenarioInput& inp, const std::string& dotted_key, const std::string& value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        throw std::invalid_argument("override '" + dotted_key + "' must look like section.key");
    }
    DatumSpec d = spec_of(inp.datum);
    const std::string section = dotted_key.substr(0, dot), key = dotted_key.substr(dot + 1);
    set_key(inp, d, section, key, value);
    if (section == "model" && inp.datum.kind != InitialDatum::Kind::Samples) inp.datum = resolve_datum(d);
    check_settings(inp);
}

json critical_json(const CriticalData& c) {
    return {{"s0_minus", c.s0_minus}, {"s0_plus", c.s0_plus},     {"s1_minus", c.s1_minus},
            {"s1_plus", c.s1_plus},   {"s2_minus", c.s2_minus},   {"s2_plus", c.s2_plus},
            {"r_star", c.r_star},     {"model_type", to_string(c.model_type)}};
}

json report_json(const ScenarioBundle& b) {
    const ScenarioInput& in = b.input;
    json j;
    j["case"] = to_string(b.label);
    j["case_forced"] = in.case_override.has_value();
    j["parameters"] = {{"alpha", in.params.alpha},
                       {"beta", in.params.beta},
                       {"L", in.grid.L},
                       {"N", in.grid.N},
                       {"datum", in.datum.describe()}};
    j["classification"] = {{"regime", to_string(classify_regime(in.params))},
                           {"min", b.stats.min},
                           {"max", b.stats.max},
                           {"mean", b.stats.mean},
                           {"initial_mass", b.initial_mass}};
    j["critical"] = critical_json(b.crit);
    json stages = json::array();
    for (const auto& st : b.stages) stages.push_back(stage_json(*st, b.initial_mass));
    j["stages"] = stages;
    if (b.plan) {
        json windows = json::array();
        for (const FluxWindow& w : b.plan->windows) windows.push_back({w.r1, w.r2});
        j["epochs"] = {{"r0", b.plan->r0},           {"c1", b.plan->c1},
                       {"c2", b.plan->c2},           {"t_hit", b.plan->t_hit},
                       {"ends", b.plan->ends},       {"windows", windows},
                       {"two_point_distances", b.epoch_distances},
                       {"two_point_trace", b.report.two_point_distance_trace},
                       {"truncated", true}};
    }
    const VerificationReport& r = b.report;
    json items = json::array();
    for (const CheckItem& c : r.items) {
        items.push_back({{"name", c.name},
                         {"pass", c.pass},
                         {"value", c.value},
                         {"threshold", c.threshold},
                         {"detail", c.detail}});
    }
    json residuals = json::array();
    for (const ResidualEntry& e : r.residuals) {
        residuals.push_back({{"mode", e.mode}, {"profile", to_string(e.profile)}, {"value", e.value}});
    }
    j["verification"] = {{"pass", r.pass()},
                         {"items", items},
                         {"catalog_modes", r.catalog_modes},
                         {"catalog_size", r.residuals.size()},
                         {"worst_residual", r.worst_residual},
                         {"worst_residual_per_history", b.worst_residuals},
                         {"baseline_residual", r.baseline_residual},
                         {"conservation_error", r.conservation_error},
                         {"residuals_first_history", residuals}};
    j["pass"] = r.pass();
    return j;
}

void write_outputs(const ScenarioBundle& b, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path fields = dir / "fields";
    fs::create_directories(fields);
    const Grid& g = b.input.grid;
    for (const auto& st : b.stages) {
        {
            std::ofstream out(fields / (st->name + "_ustar.csv"), std::ios::binary);
            out << "t,x,u\n";
            for (std::size_t n = 0; n < st->run.field.slices(); ++n) {
                write_piecewise(out, st->run.field.times[n], st->classical->density(n));
            }
        }
        if (st->fields) {
            std::ofstream out(fields / (st->name + "_q.csv"), std::ios::binary);
            out << "t,x,in_Q\n";
            for (std::size_t n = 0; n < st->fields->slices(); ++n) {
                const std::string ts = number(st->fields->times[n]);
                for (int i = 0; i < g.N; ++i) {
                    out << ts << ',' << number(g.face(i)) << ',' << (st->fields->in_q(n, i) ? 1 : 0)
                        << '\n';
                }
            }
        }
        for (const LaminateSolution& lam : st->laminates) {
            std::ofstream out(fields / (st->name + "_seed" + std::to_string(lam.seed()) + ".csv"),
                              std::ios::binary);
            out << "t,x,u\n";
            const std::size_t last = lam.slices() - 1;
            const auto every = static_cast<std::size_t>(b.input.laminate.csv_every);
            for (std::size_t n = 0; n <= last; ++n) {
                if (n % every != 0 && n != last) continue;
                write_piecewise(out, lam.time(n), lam.density(n));
            }
        }
    }
    const json meta = {{"L", g.L},
                       {"N", g.N},
                       {"alpha", b.input.params.alpha},
                       {"beta", b.input.params.beta},
                       {"mean", b.initial_mass / g.L},
                       {"catalog_modes", b.input.catalog_modes}};
    write_text(fields / "meta.json", meta.dump(2) + "\n");
    write_text(dir / "report.json", report_json(b).dump(2) + "\n");
}

SliceHistory::SliceHistory(double length, std::vector<double> times,
                           std::vector<PiecewiseSlice> slices)
    : length_(length), times_(std::move(times)), slices_(std::move(slices)) {
    if (times_.empty() || times_.size() != slices_.size()) {
        throw std::invalid_argument("history needs one slice per time and at least one slice");
    }
}

SliceHistory load_history_csv(const std::filesystem::path& path, double length) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t,x,u") {
        throw std::runtime_error(path.string() + ": expected header t,x,u");
    }
    std::vector<double> times;
    std::vector<PiecewiseSlice> slices;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::stringstream parts(line);
        std::string a, b, c;
        if (!std::getline(parts, a, ',') || !std::getline(parts, b, ',') || !std::getline(parts, c)) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) + " is malformed");
        }
        const std::string where = path.filename().string() + " row " + std::to_string(row);
        const double t = to_double(where, trim(a)), x = to_double(where, trim(b)),
                     u = to_double(where, trim(c));
        if (times.empty() || t != times.back()) {
            if (!times.empty() && !(t > times.back())) {
                throw std::runtime_error(where + ": times must increase");
            }
            times.push_back(t);
            slices.emplace_back();
        }
        PiecewiseSlice& s = slices.back();
        if (!s.x.empty() && !(x > s.x.back())) throw std::runtime_error(where + ": x must increase");
        s.x.push_back(x);
        s.u.push_back(u);
    }
    for (PiecewiseSlice& s : slices) s.x.push_back(length);
    return SliceHistory(length, std::move(times), std::move(slices));
}

}  // namespace fbf
