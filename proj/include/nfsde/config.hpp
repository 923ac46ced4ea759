#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfsde/model.hpp"
#include "nfsde/simulate.hpp"
#include "nfsde/tci.hpp"
#include "nfsde/tilt.hpp"

namespace nfsde {

/// Experiment file: one JSON object with the blocks `model`, `initial`,
/// `sim`, `tilt`, `inequality`, `convergence`, `output` and the scalar
/// `threads`. Every block is optional and falls back to the defaults below.
struct ExperimentConfig {
  nlohmann::json raw;

  CoefficientSet coeffs;
  InitialLaw initial;
  SimConfig sim;
  GirsanovTilt tilt;
  InequalityExperiment inequality;

  struct Convergence {
    std::vector<double> dts{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    int refinement = 64;
    int n_paths = 2000;
  } convergence;

  struct Output {
    std::string dir = "out";
    bool json = true;
    bool csv = true;
    bool per_path_csv = false;
  } output;

  /// FNV-1a 64 of the canonical (sorted-key) dump of `raw` without the
  /// `threads` and `output` entries, as 16 hex digits.
  std::string hash() const;
};

/// Applies `key.path=value`; the value is parsed as JSON and falls back to a string.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

/// Validates every block and builds the objects. Throws ValidationError naming the field.
ExperimentConfig parse_config(const nlohmann::json& raw);
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace nfsde
