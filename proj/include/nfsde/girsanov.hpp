#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "nfsde/model.hpp"
#include "nfsde/paths.hpp"
#include "nfsde/simulate.hpp"
#include "nfsde/tilt.hpp"

namespace nfsde {

/// Shared-noise coupling of the tilted solution X and the reference solution
/// Y. Under the coupling measure Q the driving noise W~ is a Brownian motion,
/// X has law F Pi and Y has law Pi.
struct CouplingResult {
  PathEnsemble x_paths;
  PathEnsemble y_paths;
  /// log F = int <h, dW~> + 1/2 int |h|^2 dt, which equals int <h, dW> - 1/2 int |h|^2 dt
  /// in terms of the original noise W = W~ + int h.
  std::vector<double> log_density;
  std::vector<double> h_energy;  // int |h(t, X_t)|^2 dt per path
  std::vector<double> sup_diff;  // sup_t |X(t) - Y(t)| per path
  std::vector<int> clipped_steps;
  double entropy_estimate = 0.0;
  double entropy_se = 0.0;
  double horizon = 0.0;

  std::size_t size() const noexcept { return x_paths.size(); }
  /// metric(X_i, Y_i) for each coupled pair.
  std::vector<double> paired_distances(const PathMetric& metric) const;
  /// Entropy, SE and sup_diff quantiles.
  nlohmann::json summary() const;
  /// One row per path: index, seed, log_density, h_energy, sup_diff.
  void write_csv(std::ostream& os) const;
};

/// Simulates X (drift b + sigma h, h on X's own segment) and Y (drift b)
/// driven by the same increments and started from the same initial draw.
/// `purpose` selects the noise streams, `initial_offset` the initial draws.
CouplingResult coupled_simulate(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                                const GirsanovTilt& tilt, std::uint64_t purpose = 1,
                                std::uint64_t initial_offset = 0);

struct EntropyEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo mean and standard error of 1/2 int |h(t, X_t)|^2 dt over X-paths.
EntropyEstimate relative_entropy(const CouplingResult& result);

using PathFunctional = std::function<double(const SegmentPath&)>;

struct ImportanceReport {
  double weighted_mean = 0.0;  // E_P[F phi]
  double weighted_se = 0.0;
  double tilted_mean = 0.0;  // E_Q[phi] from the coupled X-paths
  double tilted_se = 0.0;
  double z_score = 0.0;
  double density_mean = 0.0;  // E_P[F]
  double density_se = 0.0;
  double density_z = 0.0;
  double ess = 0.0;  // (sum F)^2 / sum F^2
  double ess_fraction = 0.0;
  bool low_ess = false;
  std::size_t n_paths = 0;

  nlohmann::json to_json() const;
};

/// Simulates untilted paths under P, weights them by F computed from the
/// observed control, and compares E_P[F phi] with E_Q[phi] from a coupled
/// run. `low_ess` is raised when ess_fraction < min_ess_fraction.
ImportanceReport importance_check(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                                  const GirsanovTilt& tilt, const PathFunctional& phi,
                                  double min_ess_fraction = 0.1);

/// Log density of F for untilted P-paths: int <h, dW> - 1/2 int |h|^2 dt.
std::vector<double> observed_log_density(const CoefficientSet& coeffs, const InitialLaw& initial,
                                         const SimConfig& cfg, const GirsanovTilt& tilt, std::uint64_t purpose,
                                         std::uint64_t initial_offset = 0, PathEnsemble* paths = nullptr);

}  // namespace nfsde
