// Command-line front end: regime classification, single runs, laminate
// construction, re-verification of dumped fields and parameter sweeps.
//
// Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
// input or a failed run.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbf/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace fbf;

namespace {

void print_items(const VerificationReport& r) {
    for (const CheckItem& c : r.items) {
        std::printf("  %s  %-52s value %-12.5g threshold %-12.5g %s\n", c.pass ? "PASS" : "FAIL",
                    c.name.c_str(), c.value, c.threshold, c.detail.c_str());
    }
}

int finish_run(const ScenarioBundle& b, const std::string& out, bool quiet = false) {
    if (!out.empty()) write_outputs(b, out);
    if (!quiet) {
        std::printf("case %s%s\n", to_string(b.label).c_str(),
                    b.input.case_override ? " (forced)" : "");
        for (const auto& st : b.stages) {
            std::printf("  stage %-10s t in [%g, %g], %zu slices, Q cells %zu, laminates %zu\n",
                        st->name.c_str(), st->t_begin(), st->t_end(), st->run.field.slices(),
                        st->q.q_cells, st->laminates.size());
        }
        print_items(b.report);
        std::printf("worst residual %.4e (classical baseline %.4e)\n", b.report.worst_residual,
                    b.report.baseline_residual);
        std::printf("%s\n", b.pass() ? "PASS" : "FAIL");
    }
    return b.pass() ? 0 : 1;
}

std::pair<int, int> parse_dims(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--sweep", "expected NxM, got " + text);
    const int n = std::stoi(text.substr(0, x)), m = std::stoi(text.substr(x + 1));
    if (n < 2 || m < 2) throw CLI::ValidationError("--sweep", "both counts must be at least 2");
    return {n, m};
}

int cmd_classify(double alpha, double beta, const std::string& sweep) {
    if (!sweep.empty()) {
        const auto [n, m] = parse_dims(sweep);
        std::printf("alpha,beta,regime,type\n");
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                const FluxParams p{static_cast<double>(i) / (n - 1), static_cast<double>(j) / (m - 1)};
                const RegimeClass r = classify_regime(p);
                const std::string type =
                    r == RegimeClass::FDBDF ? to_string(critical_points(p).model_type) : "";
                std::printf("%.6g,%.6g,%s,%s\n", p.alpha, p.beta, to_string(r).c_str(), type.c_str());
            }
        }
        return 0;
    }
    const FluxParams p{alpha, beta};
    p.validate();
    nlohmann::json j = {{"alpha", alpha}, {"beta", beta}, {"regime", to_string(classify_regime(p))}};
    if (in_fdbdf_region(p)) j["critical"] = critical_json(critical_points(p));
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_verify(const std::string& dir) {
    const fs::path root(dir);
    const nlohmann::json meta = nlohmann::json::parse(std::ifstream(root / "meta.json"));
    const double length = meta.at("L").get<double>();
    const double mean = meta.at("mean").get<double>();
    const FluxParams p{meta.at("alpha").get<double>(), meta.at("beta").get<double>()};
    const int modes = meta.at("catalog_modes").get<int>();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root)) {
        const std::string name = e.path().filename().string();
        if (e.path().extension() == ".csv" && name.find("_q.csv") == std::string::npos) {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::fprintf(stderr, "no density files in %s\n", dir.c_str());
        return 2;
    }
    const FluxFn flux = [p](double s) { return eval_rho(p, s); };
    bool ok = true;
    for (const fs::path& f : files) {
        const SliceHistory h = load_history_csv(f, length);
        const double err = conservation_error(h, mean);
        const double worst = worst_residual(catalog_residuals(h, flux, modes));
        const bool pass = err <= 1e-9;
        ok = ok && pass;
        std::printf("%s  %-28s slices %-6zu conservation %.3e  worst residual (unmodified flux) %.4e\n",
                    pass ? "PASS" : "FAIL", f.filename().string().c_str(), h.slices(), err, worst);
    }
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

int cmd_sweep(const std::string& config, const std::string& grid_file, const std::string& out) {
    const ScenarioInput base = config.empty() ? ScenarioInput{} : load_config(config);
    std::ifstream in(grid_file);
    if (!in) throw std::invalid_argument("cannot open sweep grid " + grid_file);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("sweep grid is empty");
    const std::vector<std::string> keys = split_csv_row(line);

    std::ofstream summary;
    if (!out.empty()) {
        fs::create_directories(out);
        summary.open(fs::path(out) / "sweep.csv");
        summary << "run," << line << ",case,pass,worst_residual\n";
    }
    std::printf("run,case,pass,worst_residual\n");
    bool all = true;
    int run = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> values = split_csv_row(line);
        if (values.size() != keys.size()) {
            throw std::invalid_argument("sweep row " + std::to_string(run + 1) + " has " +
                                        std::to_string(values.size()) + " values for " +
                                        std::to_string(keys.size()) + " keys");
        }
        ScenarioInput inp = base;
        for (std::size_t k = 0; k < keys.size(); ++k) apply_override(inp, keys[k], values[k]);
        const ScenarioBundle b = run_scenario(inp);
        const std::string dir = out.empty() ? "" : (fs::path(out) / ("run" + std::to_string(run))).string();
        finish_run(b, dir, true);
        all = all && b.pass();
        std::printf("%d,%s,%d,%.6e\n", run, to_string(b.label).c_str(), b.pass() ? 1 : 0,
                    b.report.worst_residual);
        if (summary) {
            summary << run << ',' << line << ',' << to_string(b.label) << ',' << (b.pass() ? 1 : 0)
                    << ',' << b.report.worst_residual << '\n';
        }
        ++run;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward-backward-forward diffusion: classification, simulation and laminates"};
    app.require_subcommand(1);

    double alpha = 0.9, beta = 1.0;
    std::string sweep_dims;
    auto* classify = app.add_subcommand("classify", "regime and critical points of the flux");
    classify->add_option("--alpha", alpha, "adhesion coefficient")->capture_default_str();
    classify->add_option("--beta", beta, "volume-filling coefficient")->capture_default_str();
    classify->add_option("--sweep", sweep_dims, "print the regime on an NxM grid of [0,1]^2");

    std::string config, out, fields, grid_file;
    int seeds = 3;
    auto* simulate = app.add_subcommand("simulate", "solve the modified problem without laminates");
    simulate->add_option("--config", config, "scenario config file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", out, "output directory");

    auto* construct = app.add_subcommand("construct", "solve and build laminates with seeds 1..K");
    construct->add_option("--config", config, "scenario config file")->required()->check(CLI::ExistingFile);
    construct->add_option("--seeds", seeds, "number of seeds")->check(CLI::Range(1, 64))->capture_default_str();
    construct->add_option("--out", out, "output directory");

    auto* verify = app.add_subcommand("verify", "re-check conservation and residuals of dumped fields");
    verify->add_option("--fields", fields, "fields directory with meta.json")->required()->check(CLI::ExistingDirectory);

    auto* scenario = app.add_subcommand("scenario", "full pipeline of the datum's case");
    scenario->add_option("--config", config, "scenario config file")->required()->check(CLI::ExistingFile);
    scenario->add_option("--out", out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "run one scenario per row of a CSV of config overrides");
    sweep->add_option("--config", config, "base config file")->check(CLI::ExistingFile);
    sweep->add_option("--grid", grid_file, "CSV with section.key headers")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (classify->parsed()) return cmd_classify(alpha, beta, sweep_dims);
        if (verify->parsed()) return cmd_verify(fields);
        if (sweep->parsed()) return cmd_sweep(config, grid_file, out);
        ScenarioInput inp = load_config(config);
        if (simulate->parsed()) inp.build_laminates = false;
        if (construct->parsed()) {
            inp.build_laminates = true;
            inp.laminate.seeds.clear();
            for (int k = 1; k <= seeds; ++k) inp.laminate.seeds.push_back(static_cast<std::uint64_t>(k));
        }
        return finish_run(run_scenario(inp), out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
