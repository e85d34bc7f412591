#pragma once

// Run configuration shared by all subcommands.
//
// A config file is a JSON object. Model parameters appear as flat keys
// with their canonical names; the remaining keys are the sections below.
// Unknown keys anywhere are rejected.
//
//   {
//     "a2": 0.8, "eps": 0.05, "delta": 0.1,
//     "tolerances": {"abs": 1e-10, "rel": 1e-10},
//     "sections": {"eta": 0.1, "rho": 1.0},
//     "classifier": {"surge_factor": 5, "pulse_factor": 0.5,
//                    "small_factor": 0.1, "pause_radius": 0.5},
//     "output_dir": "out",
//     "sweep": {"workers": 1, "t_end": 60, "transient": 20,
//               "axes": [{"param": "a2", "from": 0.7, "to": 0.9, "n": 5}]}
//   }

#include <string>
#include <vector>

#include <json.hpp>

#include "phantom/error.hpp"
#include "phantom/integrator.hpp"
#include "phantom/mmo.hpp"
#include "phantom/model.hpp"

namespace phantom::cli {

class ConfigError : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

struct SweepAxis {
  std::string param;
  double from = 0.0;
  double to = 0.0;
  int n = 1;

  std::vector<double> values() const;
};

struct SweepConfig {
  int workers = 1;
  double t_end = 60.0;
  double transient = 20.0;
  std::vector<SweepAxis> axes;
};

struct RunConfig {
  ParameterValues params = ParameterSet::reference().values();
  Tolerances tol{1e-10, 1e-10};
  double eta = 0.1;  // offset of the named sections of the full system
  double rho = 1.0;  // entry curve y2 = -rho^2 of the transition chart
  ClassifierThresholds thresholds;
  std::string output_dir = "out";
  SweepConfig sweep;

  /// Validates every nested invariant; throws ConfigError or InvalidParameter.
  ParameterSet parameter_set() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

/// Applies "key=value" overrides to the parameters.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Output directory: the PHANTOM_OUTPUT_DIR environment variable wins over
/// the config value.
std::string resolve_output_dir(const RunConfig& cfg);

/// FNV-1a hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace phantom::cli
