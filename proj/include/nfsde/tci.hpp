#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nfsde/model.hpp"
#include "nfsde/paths.hpp"
#include "nfsde/simulate.hpp"
#include "nfsde/tilt.hpp"

namespace nfsde {

// ---------------------------------------------------------------------------
// Closed-form constants. All functions throw DomainError outside their domain.

/// The second branch of alpha carries exp[1 + (2 l1^- + c l2) T / (1 - kappa)^2];
/// `display` uses c = 4, `derivation` uses c = 16 (the default, and the larger).
enum class AlphaVariant { display, derivation };

double alpha(double T, double kappa, double lambda1, double lambda2, double lambda3,
             AlphaVariant variant = AlphaVariant::derivation);
double beta(double T, double kappa, double lambda1, double lambda2);
/// C(lambda) of the weighted L2 coupling estimate; the W_2^2 bound is 2 C Ent.
double c_lambda(double lambda, double k, double k1, double k2, double lambda3);

struct TciCoefficients {
  double entropy_coeff = 0.0;  // multiplies sqrt(Ent)
  double initial_coeff = 0.0;  // multiplies W_2(mu, mu_F)
};

/// Uniform-metric bound: sqrt(alpha(T)) and sqrt(beta(T)).
TciCoefficients theorem21_coefficients(double T, double kappa, double lambda1, double lambda2, double lambda3,
                                       AlphaVariant variant = AlphaVariant::derivation);

enum class L2Case { one = 1, two = 2 };

/// Case one needs k1 > k2 and lambda = 0; case two needs lambda > (k2 - k1) / (1 - k)^2.
TciCoefficients theorem31_coefficients(L2Case which, double lambda, double k, double k1, double k2, double lambda3,
                                       double tau);

struct Summability {
  bool condition = false;  // lambda > (l1^- + 8 l2) / (1 - kappa)^2
  double threshold = 0.0;
  /// partial_sums[n - 1] = sum_{m=1..n} exp(-2 lambda m) (alpha(m) + beta(m)), n = 1..50.
  std::vector<double> partial_sums;
};

Summability remark21_summability(double lambda, double kappa, double lambda1, double lambda2, double lambda3 = 1.0,
                                 AlphaVariant variant = AlphaVariant::derivation, int terms = 50);

// ---------------------------------------------------------------------------
// Deterministic integral inequalities for pairs of discrete paths.

struct Lemma30Sides {
  std::array<double, 3> lhs{};
  std::array<double, 3> rhs{};
};

/// The three inequalities for paths on [-tau, t] with M(s) = xi(s) - eta(s) - G(xi_s) + G(eta_s):
///   (1) int e^{-ls} int |d(s+th)|^2 Lambda(dth) ds <= tau rho_2(xi_0, eta_0)^2 + int e^{-ls} |d(s)|^2 ds
///   (2) int e^{-ls} |M|^2 <= (1+k)^2 int e^{-ls} |d|^2 + (1+k) k tau rho_2(xi_0, eta_0)^2
///   (3) int e^{-ls} |d|^2 <= (1-k)^{-2} int e^{-ls} |M|^2 + k tau / (1-k) rho_2(xi_0, eta_0)^2
/// Integrals in s use the trapezoid rule on the path grid.
Lemma30Sides lemma30_sides(const SegmentFunctional& G, double k, const SegmentPath& xi, const SegmentPath& eta,
                           const std::vector<double>& delay_weights, double lambda);

struct Lemma30Report {
  std::size_t pairs = 0;
  std::array<std::size_t, 3> violations{};
  /// Smallest (rhs - lhs) / scale seen per inequality.
  std::array<double, 3> worst_slack{};
  double tolerance = 0.0;
};

Lemma30Report lemma30_suite(const SegmentFunctional& G, double k,
                            const std::vector<std::pair<SegmentPath, SegmentPath>>& pairs,
                            const std::vector<double>& delay_weights, double lambda, double rel_tol = 1e-10);

/// Random walk path with a random offset, on [-tau, T]; used by the suite and tests.
SegmentPath random_walk_path(std::uint64_t seed, double dt, double tau, double T, int dim, double scale = 1.0);

// ---------------------------------------------------------------------------
// End-to-end verification.

enum class InequalityId { uniform_thm21, l2_thm31_case1, l2_thm31_case2, spde_thm42, spde_thm41 };
std::string to_string(InequalityId id);
InequalityId inequality_from_string(const std::string& s);

enum class OtSolver { exact, sinkhorn };

struct InequalityExperiment {
  InequalityId id = InequalityId::uniform_thm21;
  CoefficientSet coeffs;
  InitialLaw initial;
  SimConfig sim;
  GirsanovTilt tilt;
  double lambda = 0.0;
  AlphaVariant alpha_variant = AlphaVariant::derivation;
  OtSolver solver = OtSolver::exact;
  double sinkhorn_rel_eps = 0.01;
  int bootstrap = 200;
  double ci_level = 0.95;
  std::size_t checker_pairs = 2000;
  double sampler_scale = 1.0;
};

struct ConstantsUsed {
  std::optional<double> kappa, lambda1, lambda2, lambda3, k, k1, k2;
  /// "declared" or "estimated" per constant name.
  std::vector<std::pair<std::string, std::string>> source;
  /// Checker estimates, whether or not they were used.
  std::vector<std::pair<std::string, double>> estimates;
};

struct TCIReport {
  InequalityId id = InequalityId::uniform_thm21;
  std::string metric;
  ConstantsUsed constants;
  double lambda = 0.0;
  double T = 0.0;
  double tau = 0.0;
  double dt = 0.0;
  std::optional<double> alpha, beta, c_lambda;

  double lhs = 0.0;
  double lhs_ci_lo = 0.0;
  double lhs_ci_hi = 0.0;
  double floor = 0.0;
  double entropy = 0.0;
  double entropy_se = 0.0;
  double initial_w2 = 0.0;
  double entropy_coeff = 0.0;
  double initial_coeff = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - (lhs_ci_hi - floor)
  bool pass = false;

  double coupled_w2 = 0.0;        // exact W_2 between the coupled X and Y ensembles
  double coupling_upper_bound = 0.0;
  bool coupling_domination = false;  // coupled_w2 <= coupling_upper_bound + 1e-9
  std::optional<double> tail_slack;   // e^{-lambda T} * diameter^2 for the L2 metrics

  std::size_t n_paths = 0;
  int bootstrap = 0;
  std::string solver;
  std::optional<double> epsilon;
  bool dirac_initial = true;
  double runtime_seconds = 0.0;  // not serialized: reports must be reproducible

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Runs checkers, coupling, reference and floor ensembles, OT and bootstrap.
/// Throws CheckerFailure naming the assumption when a declared constant is
/// falsified, ValidationError for inconsistent settings.
TCIReport verify_inequality(const InequalityExperiment& ex);

}  // namespace nfsde
