#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfsde/paths.hpp"

namespace nfsde {

using SegmentFunctional = std::function<Vector(const SegmentView&)>;
using DiffusionFunctional = std::function<Matrix(const SegmentView&)>;

/// Regularity constants a model declares about itself. Everything is optional;
/// `delay_weights` is the delay measure as point masses on the segment grid.
struct DeclaredConstants {
  std::optional<double> kappa;    // Lipschitz constant of G in the uniform norm
  std::optional<double> lambda1;  // dissipativity, sign: form <= -lambda1 |xi - eta|_inf^2
  std::optional<double> lambda2;  // HS-Lipschitz constant of sigma (squared)
  std::optional<double> lambda3;  // bound on sigma (see check_A3)
  std::optional<double> k;        // Lipschitz constant of G in rho_2
  std::optional<double> k1;
  std::optional<double> k2;
  std::vector<double> delay_weights;
};

/// Coefficients of d{X(t) - G(X_t)} = {A X(t) + b(X_t)} dt + sigma(X_t) dW(t).
/// Evaluators must be pure and re-entrant.
struct CoefficientSet {
  std::string name;
  int dim = 1;
  int noise_dim = 1;
  SegmentFunctional G;
  SegmentFunctional b;
  DiffusionFunctional sigma;
  /// Diagonal of the stiff linear drift; entries strictly negative.
  std::optional<Vector> A_diag;
  DeclaredConstants declared;
  /// G is identically zero (lets the integrator skip the fixed-point solve).
  bool neutral_free = false;

  /// Checks shapes and the declared-constant invariants; throws DomainError.
  void validate(int n_tau) const;
  /// Spectral bound lambda_0 = min_i(-A_ii), or 0 without A.
  double spectral_gap() const;
};

/// Trapezoid weights on the segment grid normalized to a probability measure
/// (the uniform measure d(theta)/tau).
std::vector<double> uniform_delay_weights(int n_tau);
/// Point mass at theta = 0.
std::vector<double> endpoint_delay_weights(int n_tau);
/// Integral of a segment against grid point masses.
Vector integrate_weights(const SegmentView& seg, const std::vector<double>& weights);
/// (1/tau) * trapezoid integral of a segment.
Vector segment_mean(const SegmentView& seg);

/// G(xi) = (k/tau) int xi, b(xi) = c1 xi(0) + int xi dLambda1,
/// sigma(xi) = diag(c3 xi(0) + int xi dLambda2) (noise dimension = d),
/// optionally clipped radially to operator norm <= sigma_cap.
struct LinearExample {
  double k = 0.5;
  double c1 = 0.0;
  std::vector<double> lambda1_weights;  // empty = zero measure
  double c3 = 0.0;
  std::vector<double> lambda2_weights;  // empty = zero measure
  std::optional<double> sigma_cap;
  int dim = 1;
};

/// Builds the evaluators. Declares k (and kappa = k); lambda3 when clipped;
/// and, when both delay measures vanish, closed-form (k1, k2) for the uniform
/// delay measure. Throws DomainError when k is outside (0, 1).
CoefficientSet linear_coefficients(const LinearExample& ex, int n_tau);

// ---------------------------------------------------------------------------
// Named presets used by the command line.

CoefficientSet zero_coefficients(int dim, int noise_dim);
/// G = 0, b = 0, sigma = scale * I (d = m).
CoefficientSet brownian_coefficients(int dim, double scale = 1.0);
/// Scalar delay equation b = -a xi(0) + c xi(-tau), sigma = s (additive) or
/// s * xi(0) (multiplicative), G = 0.
CoefficientSet linear_delay_coefficients(double a, double c, double s, bool multiplicative);
/// Neutral term G(xi) = kappa * xi(-tau) (endpoint-independent), b = -xi(0), sigma = s I.
CoefficientSet delayed_neutral_coefficients(int dim, double kappa, double s);
/// Adds the diagonal stiff drift A.
CoefficientSet with_stiff_drift(CoefficientSet base, const Vector& A_diag);

// ---------------------------------------------------------------------------
// Random segments and pairs for the assumption checkers.

/// Brownian-bridge-like random segments: a linear interpolation between two
/// Gaussian values of standard deviation `scale`, plus a Brownian bridge of
/// the same scale.
class SegmentSampler {
 public:
  SegmentSampler(double dt, double tau, int dim, double scale = 1.0);
  Segment draw(std::uint64_t seed) const;
  double dt() const noexcept { return dt_; }
  int n_tau() const noexcept { return n_tau_; }
  int dim() const noexcept { return dim_; }
  double scale() const noexcept { return scale_; }

 private:
  double dt_;
  int n_tau_;
  int dim_;
  double scale_;
};

/// Produces pairs (xi, eta) by cycling through four shapes of difference:
/// independent draws, constant shift, endpoint-only bump, bulk-only bump.
class PairSampler {
 public:
  enum class Shape { independent, constant_shift, endpoint_only, bulk_only };
  PairSampler(SegmentSampler base, std::uint64_t seed);
  std::pair<Segment, Segment> draw(std::uint64_t index) const;
  std::pair<Segment, Segment> draw(std::uint64_t index, Shape shape) const;
  const SegmentSampler& base() const noexcept { return base_; }

 private:
  SegmentSampler base_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Assumption checkers: sampling-based falsifiers.

enum class LipschitzNorm { uniform, rho2 };

struct LipschitzEstimate {
  double estimate = 0.0;
  std::size_t pairs_used = 0;
  /// Estimate reached 1, i.e. G is not a strict contraction on the samples.
  bool violates_contraction = false;
};

/// max |G(xi) - G(eta)| / |xi - eta| over n sampled pairs ((A1) with the
/// uniform norm, (B1) with rho_2). Throws EstimationError if all pairs coincide.
LipschitzEstimate estimate_A1(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n,
                              LipschitzNorm norm = LipschitzNorm::uniform, int threads = 1);

enum class DissipativityMode { uniform, weighted };

/// Left side of (A2)/(B2)/(C1)/(C2):
/// 2 <xi(0) - eta(0) - G(xi) + G(eta), A(xi(0) - eta(0)) + b(xi) - b(eta)> + |sigma(xi) - sigma(eta)|_HS^2.
double dissipativity_form(const CoefficientSet& coeffs, const SegmentView& xi, const SegmentView& eta);
double hs_difference_squared(const CoefficientSet& coeffs, const SegmentView& xi, const SegmentView& eta);

struct DissipativityEstimate {
  DissipativityMode mode = DissipativityMode::uniform;
  /// uniform mode: form <= -lambda1 |xi - eta|_inf^2 and |dsigma|_HS^2 <= lambda2 |xi - eta|_inf^2
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  /// weighted mode: form <= -k1 |dxi(0)|^2 + k2 int |dxi|^2 dLambda
  double k1 = 0.0;
  double k2 = 0.0;
  std::size_t samples_used = 0;
  /// Fraction of samples on which the fitted inequality holds (1 by construction).
  double satisfied_fraction = 0.0;
};

/// Fits the tightest constants consistent with n sampled pairs. Weighted mode
/// needs `delay_weights` (falls back to coeffs.declared.delay_weights).
DissipativityEstimate estimate_A2_B2(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n,
                                     DissipativityMode mode, std::vector<double> delay_weights = {},
                                     int threads = 1);

struct A3Check {
  /// Largest sampled operator norm of sigma.
  double lambda3_hat = 0.0;
  std::optional<double> declared;
  bool pass = false;
};

/// Samples segments, computes the largest singular value of sigma. Passes
/// when the declared bound covers both |sigma| and |sigma|^2 (the squared
/// form is what the coupling estimates consume).
A3Check check_A3(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n, int threads = 1);

}  // namespace nfsde
