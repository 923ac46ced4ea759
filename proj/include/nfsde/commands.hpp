#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfsde/config.hpp"
#include "nfsde/tci.hpp"

namespace nfsde {

/// Bumped whenever a key of a written JSON document changes meaning.
inline constexpr int kSchemaVersion = 1;

struct ConstantsQuery {
  std::optional<double> T, kappa, l1, l2, l3, lambda, k, k1, k2, tau;
  AlphaVariant variant = AlphaVariant::derivation;
};

/// Evaluates every quantity whose inputs are present. Domain violations of a
/// single quantity land in "errors"; kappa or k outside [0, 1) throws
/// ValidationError naming (A1) / (B1).
nlohmann::json evaluate_constants(const ConstantsQuery& q);

/// One axis of a sweep: "name=start:stop:count", inclusive linear grid.
struct SweepAxis {
  std::string name;
  std::vector<double> values;
};
SweepAxis parse_sweep(const std::string& text);

/// Cartesian product of the axes over the base query; one CSV row each,
/// with the failure reason in the last column instead of aborting.
void constants_sweep_csv(const ConstantsQuery& base, const std::vector<SweepAxis>& axes, std::ostream& os);

/// Name of the pipeline stage that is currently running; used in error messages.
struct StageTracker {
  std::string current = "config";
  void enter(std::string name) { current = std::move(name); }
};

struct RunContext {
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
  StageTracker* stage = nullptr;
};

/// Writes paths/path_XXXXX.txt and manifest.json. Returns the manifest.
nlohmann::json run_simulate(const ExperimentConfig& cfg, const RunContext& ctx);
/// Writes coupling.json (and coupling_paths.csv when requested). Returns the document.
nlohmann::json run_couple(const ExperimentConfig& cfg, const RunContext& ctx);
/// Writes report.json and report.csv as selected by output.formats. Returns the report.
TCIReport run_verify(const ExperimentConfig& cfg, const RunContext& ctx);
/// Writes convergence.json and convergence.csv. Returns the document.
nlohmann::json run_convergence(const ExperimentConfig& cfg, const RunContext& ctx);

/// Human-readable one-screen summary of a report.
std::string format_report(const TCIReport& r);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nfsde
