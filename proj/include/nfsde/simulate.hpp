#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nfsde/model.hpp"
#include "nfsde/paths.hpp"
#include "nfsde/tilt.hpp"

namespace nfsde {

struct SimConfig {
  double T = 1.0;
  double dt = 1.0 / 64;
  double tau = 0.25;
  int dim = 1;
  int noise_dim = 1;
  int n_paths = 1;
  std::uint64_t seed = 1;
  double fp_tol = 1e-12;
  int fp_max_iter = 100;
  int threads = 0;

  int n_tau() const { return grid_steps(tau, dt, "tau"); }
  int n_steps() const { return grid_steps(T, dt, "T"); }

  /// Checks grid alignment and counts, raises fp_max_iter to
  /// ceil(log(fp_tol) / log(kappa)) + 10 for contraction rate kappa, and
  /// enforces the explicit-Euler guard a * dt < 1 for every stiff entry.
  /// Throws ValidationError naming the field.
  void validate(std::optional<double> kappa = std::nullopt, const CoefficientSet* coeffs = nullptr);
};

/// Brownian increments for one path, generated on demand from a Philox
/// counter (step, coordinate block, path seed). `coarsen` > 1 sums that many
/// consecutive fine increments, so a coarse and a fine run see the same
/// Brownian path.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t path_seed, int noise_dim, double fine_dt, int steps, int coarsen = 1);

  Vector increment(int step) const;
  void increment(int step, std::span<double> out) const;

  std::uint64_t seed() const noexcept { return seed_; }
  int noise_dim() const noexcept { return m_; }
  int steps() const noexcept { return steps_; }
  double dt() const noexcept { return fine_dt_ * coarsen_; }
  /// Same Brownian path observed with a step `factor` times larger.
  NoiseStream coarsened(int factor) const;

 private:
  void fine_increment_add(std::int64_t fine_step, std::span<double> out) const;

  std::uint64_t seed_;
  int m_;
  double fine_dt_;
  int steps_;
  int coarsen_;
};

struct StepStats {
  int iterations = 0;
  /// Largest ratio of successive fixed-point changes (contraction witness),
  /// taken while the changes are still well above rounding level.
  double max_ratio = 0.0;
  double last_change = 0.0;
};

/// One step of the neutral Euler scheme:
///   M = X(t) - G(X_t) + {A X(t) + b(X_t) + sigma(X_t) h} dt + sigma(X_t) dW,
///   X(t + dt) = M + G(X_{t+dt}) solved by fixed-point iteration on the
///   unknown endpoint. Throws ConvergenceError / NumericError.
/// `control`, when given, is h in R^m and contributes sigma(X_t) h dt.
Vector euler_step(const CoefficientSet& coeffs, const SegmentView& current, const Vector& dW, double dt,
                  double fp_tol = 1e-12, int fp_max_iter = 100, const Vector* control = nullptr,
                  StepStats* stats = nullptr);

/// Accumulated along a path when a tilt is supplied.
struct TiltTrace {
  double h_energy = 0.0;      // sum |h|^2 dt
  double noise_pairing = 0.0;  // sum <h, dW> with the path's own increments
  int clipped_steps = 0;
  int fp_iterations = 0;
  double max_fp_ratio = 0.0;
};

enum class TiltUse { apply, observe };

/// Integrates one path. With TiltUse::apply the drift gains sigma(X_t) h(t, X_t);
/// with TiltUse::observe h is only evaluated and traced (used for likelihood
/// ratios of untilted paths).
SegmentPath simulate_path(const CoefficientSet& coeffs, const Segment& initial, const SimConfig& cfg,
                          const NoiseStream& noise, const GirsanovTilt* tilt = nullptr,
                          TiltUse use = TiltUse::apply, TiltTrace* trace = nullptr);

/// Initial law mu: a Dirac mass or a seeded random segment law.
struct InitialLaw {
  std::function<Segment(std::uint64_t path_index)> draw;
  bool dirac = true;

  static InitialLaw point(Segment xi);
  static InitialLaw random(SegmentSampler sampler, std::uint64_t seed, std::optional<Vector> mean = std::nullopt);
};

/// Per-path noise seed derived from (root seed, purpose, path index).
std::uint64_t path_seed(std::uint64_t root, std::uint64_t purpose, std::uint64_t index);

/// n_paths independent paths; path i depends only on (seed, purpose, i) and
/// on the initial draw initial_offset + i.
PathEnsemble simulate_ensemble(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                               const GirsanovTilt* tilt = nullptr,
                               std::uint64_t purpose = 1 /* StreamPurpose::noise */,
                               std::uint64_t initial_offset = 0);

// ---------------------------------------------------------------------------
// Convergence studies.

struct ConvergenceStudy {
  std::vector<double> dts;
  std::vector<double> errors;  // RMS endpoint error against the reference
  double reference_dt = 0.0;
  double observed_order = 0.0;  // least-squares slope of log error vs log dt
};

/// RMS error of X(T) over n_paths against a reference run with step
/// min(dts) / refinement on the same Brownian paths.
/// The initial segment is given as a function of theta so every level can
/// sample it on its own grid; tau must be a multiple of every step.
ConvergenceStudy strong_convergence(const CoefficientSet& coeffs, const std::function<Vector(double)>& initial,
                                    double tau, double T, const std::vector<double>& dts, int refinement,
                                    int n_paths, std::uint64_t seed, int threads = 0);

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors);

}  // namespace nfsde
