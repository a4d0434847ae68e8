// JSON serialization for filter artifacts, scenarios, budgets and reports.
// Object keys are checked strictly: unknown keys are an error.
#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "afesim/filter_design.hpp"
#include "afesim/sim_engine.hpp"

namespace afesim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterArtifact {
  FilterSpec spec;
  int order = 2;
  BiquadCoeffs coeffs;
  QuantizedBiquad quantized;
};

/// Designs and quantizes in one go; the result is a pure function of the inputs.
FilterArtifact make_filter_artifact(const FilterSpec& spec, int coeff_fraction_bits = 40,
                                    const DatapathFormats& datapath = {});

nlohmann::ordered_json to_json(const FilterArtifact& a);
FilterArtifact filter_artifact_from_json(const nlohmann::json& j);
void save_filter_artifact(const std::string& path, const FilterArtifact& a);
FilterArtifact load_filter_artifact(const std::string& path);

/// Relative file references inside the document resolve against `base_dir`.
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir);
Scenario load_scenario(const std::string& path);

BudgetConfig budget_from_json(const nlohmann::json& j);
BudgetConfig load_budget(const std::string& path);

nlohmann::ordered_json to_json(const SimReport& r);

/// Reads a whole JSON file; parse failures become ConfigError.
nlohmann::json read_json_file(const std::string& path);
/// Writes with two-space indentation and a trailing newline.
void write_json_file(const std::string& path, const nlohmann::ordered_json& j);

}  // namespace afesim
