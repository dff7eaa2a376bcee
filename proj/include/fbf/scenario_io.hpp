#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbf/scenario_orchestrator.hpp"

namespace fbf {

/// One documented configuration key.
struct ConfigKey {
    std::string section;
    std::string key;
    std::string default_value;
    std::string meaning;
};

/// Every key the config reader accepts, in file order.
const std::vector<ConfigKey>& config_keys();

/// Reads an INI-style file with sections model, grid, solver, laminate and
/// epochs. Unknown sections or keys and malformed values raise
/// std::invalid_argument naming the offending entry.
ScenarioInput parse_config(std::istream& in);
ScenarioInput load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides on top of an input, as used by
/// sweeps.
void apply_override(ScenarioInput& inp, const std::string& dotted_key, const std::string& value);

nlohmann::json critical_json(const CriticalData& c);
nlohmann::json report_json(const ScenarioBundle& b);

/// Writes report.json and fields/ under dir:
///   <stage>_ustar.csv        t,x,u for every stored slice of u*
///   <stage>_q.csv            t,x,in_Q for every stored slice
///   <stage>_seed<k>.csv      t,x,u of the laminate on a slice subsample
///   meta.json                length, mean and flux parameters for `verify`
/// x is the left end of each constant piece; the last piece ends at L.
void write_outputs(const ScenarioBundle& b, const std::filesystem::path& dir);

/// Piecewise-constant history read back from a t,x,u CSV file.
class SliceHistory : public DensityHistory {
public:
    SliceHistory(double length, std::vector<double> times, std::vector<PiecewiseSlice> slices);
    double length() const override { return length_; }
    std::size_t slices() const override { return times_.size(); }
    double time(std::size_t n) const override { return times_[n]; }
    PiecewiseSlice density(std::size_t n) const override { return slices_[n]; }

private:
    double length_;
    std::vector<double> times_;
    std::vector<PiecewiseSlice> slices_;
};

/// Throws std::runtime_error on unreadable or malformed files.
SliceHistory load_history_csv(const std::filesystem::path& path, double length);

}  // namespace fbf
