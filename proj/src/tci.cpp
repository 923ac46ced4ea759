#include "nfsde/tci.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "nfsde/errors.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/ot.hpp"
#include "nfsde/parallel.hpp"
#include "nfsde/rng.hpp"
#include "nfsde/stats.hpp"

namespace nfsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pos(double x) { return x > 0.0 ? x : 0.0; }
double neg(double x) { return x < 0.0 ? -x : 0.0; }

void check_kappa(double kappa, const char* name) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1)");
}

}  // namespace

double alpha(double T, double kappa, double lambda1, double lambda2, double lambda3, AlphaVariant variant) {
  check_kappa(kappa, "kappa");
  if (!(T > 0.0)) throw DomainError("alpha needs T > 0");
  if (!(lambda2 >= 0.0)) throw DomainError("alpha needs lambda2 >= 0");
  if (!(lambda3 > 0.0)) throw DomainError("alpha needs lambda3 > 0");
  if (!std::isfinite(lambda1)) throw DomainError("alpha needs a finite lambda1");
  const double q = (1.0 - kappa) * (1.0 - kappa);
  const double lp = pos(lambda1);
  const double lm = neg(lambda1);
  const double pre = 2.0 * lambda3 * (1.0 + kappa) * (1.0 + kappa) / q;
  double first = kInf;
  if (lp > 0.0) {
    const double s = 4.0 * std::sqrt(lambda2) + std::sqrt(16.0 * lambda2 + lp);
    first = s * s / (lp * lp);
  }
  const double c = variant == AlphaVariant::derivation ? 16.0 : 4.0;
  const double second = 4.0 * T * std::exp(1.0 + (2.0 * lm + c * lambda2) * T / q) / (2.0 * T * lp + q);
  return pre * std::min(first, second);
}

double beta(double T, double kappa, double lambda1, double lambda2) {
  check_kappa(kappa, "kappa");
  if (!(T > 0.0)) throw DomainError("beta needs T > 0");
  if (!(lambda2 >= 0.0)) throw DomainError("beta needs lambda2 >= 0");
  if (!std::isfinite(lambda1)) throw DomainError("beta needs a finite lambda1");
  const double q = (1.0 - kappa) * (1.0 - kappa);
  const double lp = pos(lambda1);
  const double lm = neg(lambda1);
  double first = kInf;
  if (lp > 0.0) {
    const double s = 2.0 * std::sqrt(lambda2) + std::sqrt(4.0 * lambda2 + lp);
    first = s * s / lp;
  }
  const double second = 2.0 * std::exp((2.0 * lm + 16.0 * lambda2) * T / q);
  return 1.0 + (1.0 + kappa) * (1.0 + kappa) / q * std::min(first, second);
}

double c_lambda(double lambda, double k, double k1, double k2, double lambda3) {
  check_kappa(k, "k");
  if (!(k2 >= 0.0)) throw DomainError("k2 must be nonnegative");
  if (!(lambda3 > 0.0)) throw DomainError("lambda3 must be positive");
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  const double num = lambda3 * std::pow(1.0 + (1.0 + k) * (1.0 + k), 2);
  if (lambda == 0.0) {
    if (!(k1 > k2)) throw DomainError("C(0) requires k1 > k2");
    return num / ((k1 - k2) * (k1 - k2));
  }
  const double den = k1 - k2 + lambda * (1.0 - k) * (1.0 - k);
  if (!(den > 0.0)) throw DomainError("C(lambda) requires lambda > (k2 - k1) / (1 - k)^2");
  return num / (den * den);
}

TciCoefficients theorem21_coefficients(double T, double kappa, double lambda1, double lambda2, double lambda3,
                                       AlphaVariant variant) {
  return {std::sqrt(alpha(T, kappa, lambda1, lambda2, lambda3, variant)), std::sqrt(beta(T, kappa, lambda1, lambda2))};
}

TciCoefficients theorem31_coefficients(L2Case which, double lambda, double k, double k1, double k2, double lambda3,
                                       double tau) {
  check_kappa(k, "k");
  if (!(k2 >= 0.0)) throw DomainError("k2 must be nonnegative");
  if (!(lambda3 > 0.0)) throw DomainError("lambda3 must be positive");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const double top = std::sqrt(2.0 * lambda3) * (1.0 + (1.0 + k) * (1.0 + k));
  if (which == L2Case::one) {
    if (lambda != 0.0) throw DomainError("case one is stated for lambda = 0");
    if (!(k1 > k2)) throw DomainError("case one requires k1 > k2");
    return {top / (k1 - k2), std::sqrt(tau + (k2 * tau + 1.0 + k) / (k1 - k2))};
  }
  const double den = k1 - k2 + lambda * (1.0 - k) * (1.0 - k);
  if (!(lambda > 0.0) || !(den > 0.0)) throw DomainError("case two requires lambda > (k2 - k1) / (1 - k)^2");
  return {top / den, std::sqrt(tau + (lambda * k * (1.0 - k) * tau + k2 * tau + 1.0 + k) / den)};
}

Summability remark21_summability(double lambda, double kappa, double lambda1, double lambda2, double lambda3,
                                 AlphaVariant variant, int terms) {
  if (!(lambda > 0.0)) throw DomainError("summability needs lambda > 0");
  check_kappa(kappa, "kappa");
  Summability s;
  s.threshold = (neg(lambda1) + 8.0 * lambda2) / ((1.0 - kappa) * (1.0 - kappa));
  s.condition = lambda > s.threshold;
  double acc = 0.0;
  for (int n = 1; n <= terms; ++n) {
    const double t = static_cast<double>(n);
    const double a = alpha(t, kappa, lambda1, lambda2, lambda3, variant);
    const double b = beta(t, kappa, lambda1, lambda2);
    const double term = std::isfinite(a + b) ? std::exp(-2.0 * lambda * t) * (a + b) : kInf;
    acc += term;
    s.partial_sums.push_back(acc);
  }
  return s;
}

// ---------------------------------------------------------------------------

Lemma30Sides lemma30_sides(const SegmentFunctional& G, double k, const SegmentPath& xi, const SegmentPath& eta,
                           const std::vector<double>& delay_weights, double lambda) {
  check_kappa(k, "k");
  if (!xi.same_grid(eta)) throw DomainError("lemma suite needs paths on a shared grid");
  if (delay_weights.size() != static_cast<std::size_t>(xi.n_tau() + 1)) {
    throw DomainError("delay measure must have one weight per segment grid point");
  }
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  const int n = xi.n_steps();
  const double dt = xi.dt();
  const double tau = xi.tau();
  double i_d = 0.0, i_l = 0.0, i_m = 0.0;
  for (int i = 0; i <= n; ++i) {
    double w = (i == 0 || i == n) ? 0.5 * dt : dt;
    if (n == 0) w = 0.0;
    const double e = std::exp(-lambda * i * dt);
    const Vector d = xi.value_at_step(i) - eta.value_at_step(i);
    const SegmentView wx = xi.window(i), we = eta.window(i);
    double shifted = 0.0;
    for (int j = 0; j <= xi.n_tau(); ++j) {
      shifted += delay_weights[static_cast<std::size_t>(j)] * (wx.at(j) - we.at(j)).squaredNorm();
    }
    const Vector m = d - (G(wx) - G(we));
    i_d += w * e * d.squaredNorm();
    i_l += w * e * shifted;
    i_m += w * e * m.squaredNorm();
  }
  const double r0 = rho_2(xi.initial_segment(), eta.initial_segment());
  const double t0 = tau * r0 * r0;
  Lemma30Sides s;
  s.lhs = {i_l, i_m, i_d};
  s.rhs = {t0 + i_d, (1.0 + k) * (1.0 + k) * i_d + (1.0 + k) * k * t0,
           i_m / ((1.0 - k) * (1.0 - k)) + k / (1.0 - k) * t0};
  return s;
}

Lemma30Report lemma30_suite(const SegmentFunctional& G, double k,
                            const std::vector<std::pair<SegmentPath, SegmentPath>>& pairs,
                            const std::vector<double>& delay_weights, double lambda, double rel_tol) {
  Lemma30Report r;
  r.pairs = pairs.size();
  r.tolerance = rel_tol;
  r.worst_slack.fill(kInf);
  for (const auto& [a, b] : pairs) {
    const Lemma30Sides s = lemma30_sides(G, k, a, b, delay_weights, lambda);
    for (int q = 0; q < 3; ++q) {
      const double scale = std::max({std::abs(s.lhs[q]), std::abs(s.rhs[q]), std::numeric_limits<double>::min()});
      const double slack = (s.rhs[q] - s.lhs[q]) / scale;
      r.worst_slack[q] = std::min(r.worst_slack[q], slack);
      if (slack < -rel_tol) ++r.violations[q];
    }
  }
  return r;
}

SegmentPath random_walk_path(std::uint64_t seed, double dt, double tau, double T, int dim, double scale) {
  const int n_tau = grid_steps(tau, dt, "tau");
  const int n_steps = grid_steps(T, dt, "T");
  CounterRng rng(seed, 0);
  const int points = n_tau + n_steps + 1;
  std::vector<double> v(static_cast<std::size_t>(points) * dim);
  const double step = scale * std::sqrt(dt);
  for (int c = 0; c < dim; ++c) {
    double x = scale * rng.normal();
    for (int p = 0; p < points; ++p) {
      v[static_cast<std::size_t>(p) * dim + c] = x;
      x += step * rng.normal();
    }
  }
  return SegmentPath(dt, n_tau, n_steps, dim, std::move(v));
}

// ---------------------------------------------------------------------------

std::string to_string(InequalityId id) {
  switch (id) {
    case InequalityId::uniform_thm21: return "uniform-thm21";
    case InequalityId::l2_thm31_case1: return "l2-thm31-case1";
    case InequalityId::l2_thm31_case2: return "l2-thm31-case2";
    case InequalityId::spde_thm42: return "spde-thm42";
    case InequalityId::spde_thm41: return "spde-thm41";
  }
  return "unknown";
}

InequalityId inequality_from_string(const std::string& s) {
  for (auto id : {InequalityId::uniform_thm21, InequalityId::l2_thm31_case1, InequalityId::l2_thm31_case2,
                  InequalityId::spde_thm42, InequalityId::spde_thm41}) {
    if (to_string(id) == s) return id;
  }
  throw ValidationError("inequality.id", "unknown inequality '" + s + "'");
}

namespace {

bool uses_uniform_metric(InequalityId id) {
  return id == InequalityId::uniform_thm21 || id == InequalityId::spde_thm42;
}

bool is_spde(InequalityId id) { return id == InequalityId::spde_thm41 || id == InequalityId::spde_thm42; }

double tol_for(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

// Falsifies declared constants against sampled pairs and fills in the
// missing ones from the estimates.
ConstantsUsed resolve_constants(const InequalityExperiment& ex, std::uint64_t seed, int threads) {
  const auto& c = ex.coeffs;
  const auto& d = c.declared;
  const SegmentSampler base(ex.sim.dt, ex.sim.tau, c.dim, ex.sampler_scale);
  const PairSampler pairs(base, derive_seed(seed, StreamPurpose::pair_sampler, 0));
  const std::size_t n = ex.checker_pairs;
  ConstantsUsed u;
  auto take = [&u](const char* name, std::optional<double>& slot, std::optional<double> declared, double estimate) {
    u.estimates.emplace_back(name, estimate);
    if (declared) {
      slot = declared;
      u.source.emplace_back(name, "declared");
    } else {
      slot = estimate;
      u.source.emplace_back(name, "estimated");
    }
  };

  const A3Check a3 = check_A3(c, pairs, n, threads);
  if (d.lambda3 && !a3.pass) {
    throw CheckerFailure("(A3)", "sampled |sigma| = " + std::to_string(a3.lambda3_hat) + " exceeds the declared bound");
  }
  take("lambda3", u.lambda3, d.lambda3, std::max(a3.lambda3_hat, a3.lambda3_hat * a3.lambda3_hat));
  if (!(*u.lambda3 > 0.0)) throw CheckerFailure("(A3)", "sigma vanishes on every sample; lambda3 must be positive");

  if (uses_uniform_metric(ex.id)) {
    const LipschitzEstimate a1 = estimate_A1(c, pairs, n, LipschitzNorm::uniform, threads);
    if (a1.violates_contraction) throw CheckerFailure("(A1)", "G is not a contraction on the samples");
    if (d.kappa && a1.estimate > *d.kappa + tol_for(*d.kappa)) {
      throw CheckerFailure("(A1)", "sampled Lipschitz ratio " + std::to_string(a1.estimate) + " exceeds kappa");
    }
    take("kappa", u.kappa, d.kappa, a1.estimate);
    const auto a2 = estimate_A2_B2(c, pairs, n, DissipativityMode::uniform, {}, threads);
    const std::string tag = is_spde(ex.id) ? "(C1)" : "(A2)";
    if (d.lambda1 && *d.lambda1 > a2.lambda1 + tol_for(*d.lambda1)) {
      throw CheckerFailure(tag, "declared lambda1 exceeds the sampled bound " + std::to_string(a2.lambda1));
    }
    if (d.lambda2 && *d.lambda2 + tol_for(*d.lambda2) < a2.lambda2) {
      throw CheckerFailure(tag, "sampled HS ratio " + std::to_string(a2.lambda2) + " exceeds lambda2");
    }
    take("lambda1", u.lambda1, d.lambda1, a2.lambda1);
    take("lambda2", u.lambda2, d.lambda2, a2.lambda2);
    return u;
  }

  const LipschitzEstimate b1 = estimate_A1(c, pairs, n, LipschitzNorm::rho2, threads);
  if (b1.violates_contraction) throw CheckerFailure("(B1)", "G is not a contraction in rho_2 on the samples");
  if (d.k && b1.estimate > *d.k + tol_for(*d.k)) {
    throw CheckerFailure("(B1)", "sampled rho_2 Lipschitz ratio " + std::to_string(b1.estimate) + " exceeds k");
  }
  take("k", u.k, d.k, b1.estimate);
  std::vector<double> weights = d.delay_weights.empty() ? uniform_delay_weights(base.n_tau()) : d.delay_weights;
  const auto b2 = estimate_A2_B2(c, pairs, n, DissipativityMode::weighted, weights, threads);
  const std::string tag = is_spde(ex.id) ? "(C2)" : "(B2)";
  if (d.k1 && d.k2) {
    // Check the declared pair on every sampled pair directly.
    for (std::size_t i = 0; i < n; ++i) {
      const auto [xi, eta] = pairs.draw(i);
      const double form = dissipativity_form(c, xi, eta);
      const double x = (xi.endpoint() - eta.endpoint()).squaredNorm();
      double y = 0.0;
      for (int j = 0; j < xi.points(); ++j) y += weights[static_cast<std::size_t>(j)] * (xi.at(j) - eta.at(j)).squaredNorm();
      const double rhs = -*d.k1 * x + *d.k2 * y;
      if (form > rhs + 1e-9 * (std::abs(form) + std::abs(*d.k1 * x) + *d.k2 * y + 1e-300)) {
        throw CheckerFailure(tag, "declared (k1, k2) violated on sample " + std::to_string(i));
      }
    }
  }
  take("k1", u.k1, (d.k1 && d.k2) ? d.k1 : std::nullopt, b2.k1);
  take("k2", u.k2, (d.k1 && d.k2) ? d.k2 : std::nullopt, b2.k2);
  return u;
}

std::vector<double> bootstrap_w2(const CostMatrix& c, int resamples, std::uint64_t seed, int threads,
                                 const std::function<double(const CostMatrix&)>& solve) {
  std::vector<double> out(static_cast<std::size_t>(resamples));
  parallel_for(out.size(), threads, [&](std::size_t b) {
    CounterRng rng(derive_seed(seed, StreamPurpose::bootstrap, b), 0);
    std::vector<std::size_t> rows(c.n), cols(c.n);
    for (auto& r : rows) r = rng.below(c.n);
    for (auto& r : cols) r = rng.below(c.n);
    out[b] = solve(c.select(rows, cols));
  });
  return out;
}

}  // namespace

TCIReport verify_inequality(const InequalityExperiment& ex) {
  const auto started = std::chrono::steady_clock::now();
  SimConfig cfg = ex.sim;
  const auto& coeffs = ex.coeffs;
  cfg.validate(coeffs.declared.kappa, &coeffs);
  coeffs.validate(cfg.n_tau());
  if (is_spde(ex.id) && !coeffs.A_diag) throw ValidationError("model.A", "the stiff-drift theorems need A");
  if (ex.bootstrap < 1) throw ValidationError("inequality.bootstrap", "must be >= 1");
  if (!(ex.ci_level > 0.0 && ex.ci_level < 1.0)) throw ValidationError("inequality.ci_level", "must lie in (0, 1)");
  if (!(ex.lambda >= 0.0)) throw ValidationError("inequality.lambda", "must be nonnegative");
  if (uses_uniform_metric(ex.id) && ex.lambda != 0.0) {
    throw ValidationError("inequality.lambda", "the uniform-metric theorems use lambda = 0");
  }
  const int threads = cfg.threads;

  TCIReport r;
  r.id = ex.id;
  r.lambda = ex.lambda;
  r.T = cfg.T;
  r.tau = cfg.tau;
  r.dt = cfg.dt;
  r.n_paths = static_cast<std::size_t>(cfg.n_paths);
  r.bootstrap = ex.bootstrap;
  r.dirac_initial = ex.initial.dirac;
  r.solver = ex.solver == OtSolver::exact ? "exact" : "sinkhorn";

  // Constants first: a falsified assumption aborts before any simulation.
  r.constants = resolve_constants(ex, cfg.seed, threads);
  const auto& k = r.constants;
  PathMetric metric;
  SegmentMetric initial_metric;
  if (uses_uniform_metric(ex.id)) {
    metric = PathMetric::uniform();
    initial_metric = SegmentMetric::uniform;
    r.alpha = alpha(cfg.T, *k.kappa, *k.lambda1, *k.lambda2, *k.lambda3, ex.alpha_variant);
    r.beta = beta(cfg.T, *k.kappa, *k.lambda1, *k.lambda2);
    const auto co = theorem21_coefficients(cfg.T, *k.kappa, *k.lambda1, *k.lambda2, *k.lambda3, ex.alpha_variant);
    r.entropy_coeff = co.entropy_coeff;
    r.initial_coeff = co.initial_coeff;
  } else {
    metric = PathMetric::l2(ex.lambda);
    initial_metric = ex.id == InequalityId::spde_thm41 ? SegmentMetric::l2 : SegmentMetric::l2_tilde;
    L2Case which = L2Case::two;
    if (ex.id == InequalityId::l2_thm31_case1) which = L2Case::one;
    if (ex.id == InequalityId::spde_thm41 && ex.lambda == 0.0) which = L2Case::one;
    if (which == L2Case::one && ex.lambda != 0.0) throw ValidationError("inequality.lambda", "case one uses lambda = 0");
    if (which == L2Case::one && !(*k.k1 > *k.k2)) {
      throw ValidationError("inequality.id", "case one needs k1 > k2; use case two with lambda > (k2 - k1) / (1 - k)^2");
    }
    if (which == L2Case::two && !(ex.lambda > 0.0 && *k.k1 - *k.k2 + ex.lambda * (1 - *k.k) * (1 - *k.k) > 0.0)) {
      throw ValidationError("inequality.lambda", "case two needs lambda > (k2 - k1) / (1 - k)^2 and lambda > 0");
    }
    r.c_lambda = c_lambda(ex.lambda, *k.k, *k.k1, *k.k2, *k.lambda3);
    const auto co = theorem31_coefficients(which, ex.lambda, *k.k, *k.k1, *k.k2, *k.lambda3, cfg.tau);
    r.entropy_coeff = co.entropy_coeff;
    r.initial_coeff = co.initial_coeff;
  }
  r.metric = metric.tag();

  const auto n = static_cast<std::uint64_t>(cfg.n_paths);
  const CouplingResult coupled = coupled_simulate(coeffs, ex.initial, cfg, ex.tilt,
                                                  static_cast<std::uint64_t>(StreamPurpose::noise), 0);
  PathEnsemble reference;
  const std::vector<double> ref_logf =
      observed_log_density(coeffs, ex.initial, cfg, ex.tilt,
                           static_cast<std::uint64_t>(StreamPurpose::reference_ensemble), n, &reference);
  const PathEnsemble floor_ens = simulate_ensemble(coeffs, ex.initial, cfg, nullptr,
                                                   static_cast<std::uint64_t>(StreamPurpose::floor_ensemble), 2 * n);

  const CostMatrix c_xb = cost_matrix(coupled.x_paths, reference, metric, threads);
  const CostMatrix c_bf = cost_matrix(reference, floor_ens, metric, threads);
  std::function<double(const CostMatrix&)> solve;
  if (ex.solver == OtSolver::exact) {
    solve = [](const CostMatrix& c) { return exact_w2(c); };
    r.lhs = solve(c_xb);
  } else {
    SinkhornOptions opt;
    opt.epsilon = relative_epsilon(c_xb, ex.sinkhorn_rel_eps);
    r.epsilon = opt.epsilon;
    // Bootstrap resamples are solved without debiasing; the point estimate is debiased.
    solve = [opt](const CostMatrix& c) { return sinkhorn_w2(c, opt).estimate; };
    const CostMatrix c_xx = cost_matrix(coupled.x_paths, coupled.x_paths, metric, threads);
    const CostMatrix c_bb = cost_matrix(reference, reference, metric, threads);
    r.lhs = sinkhorn_w2(c_xb, opt, &c_xx, &c_bb).debiased;
  }
  r.floor = solve(c_bf);
  const auto boot = bootstrap_w2(c_xb, ex.bootstrap, cfg.seed, threads, solve);
  r.lhs_ci_lo = quantile(boot, 0.5 * (1.0 - ex.ci_level));
  r.lhs_ci_hi = quantile(boot, 0.5 * (1.0 + ex.ci_level));

  const CostMatrix c_xy = cost_matrix(coupled.x_paths, coupled.y_paths, metric, threads);
  r.coupling_upper_bound = coupling_upper_bound(coupled, metric);
  if (c_xy.n <= kExactW2Cap) {
    r.coupled_w2 = exact_w2(c_xy);
    r.coupling_domination = r.coupled_w2 <= r.coupling_upper_bound + 1e-9;
  }

  r.entropy = coupled.entropy_estimate;
  r.entropy_se = coupled.entropy_se;

  if (!ex.initial.dirac) {
    // mu_F by F-weighted resampling of the reference initial segments.
    std::vector<double> w(ref_logf.size());
    const double mx = *std::max_element(ref_logf.begin(), ref_logf.end());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(ref_logf[i] - mx));
    std::vector<double> cdf(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) cdf[i] = (acc += w[i] / total);
    CounterRng rng(derive_seed(cfg.seed, StreamPurpose::resampling, 0), 0);
    std::vector<Segment> mu, mu_f;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mu.push_back(to_segment(reference.paths[i].initial_segment()));
      const double u = rng.uniform();
      std::size_t pick = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      pick = std::min(pick, w.size() - 1);
      mu_f.push_back(to_segment(reference.paths[pick].initial_segment()));
    }
    r.initial_w2 = exact_w2(segment_cost_matrix(mu, mu_f, initial_metric, threads));
  }

  r.rhs = r.entropy_coeff * std::sqrt(std::max(0.0, r.entropy)) + r.initial_coeff * r.initial_w2;
  r.margin = r.rhs - (r.lhs_ci_hi - r.floor);
  r.pass = r.margin >= 0.0;

  if (!uses_uniform_metric(ex.id)) {
    double diam = 0.0;
    const int last = cfg.n_steps();
    for (const auto& a : coupled.x_paths.paths) {
      for (const auto& b : reference.paths) diam = std::max(diam, rho_2(a.window(last), b.window(last)));
    }
    r.tail_slack = std::exp(-ex.lambda * cfg.T) * diam * diam;
  }
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

nlohmann::json TCIReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["inequality"] = to_string(id);
  j["metric"] = metric;
  nlohmann::json params = {{"T", T}, {"tau", tau}, {"dt", dt}, {"lambda", lambda}};
  auto put = [&params](const char* name, const std::optional<double>& v) {
    if (v) params[name] = *v;
  };
  put("kappa", constants.kappa);
  put("lambda1", constants.lambda1);
  put("lambda2", constants.lambda2);
  put("lambda3", constants.lambda3);
  put("k", constants.k);
  put("k1", constants.k1);
  put("k2", constants.k2);
  j["parameters"] = params;
  nlohmann::json src = nlohmann::json::object(), est = nlohmann::json::object();
  for (const auto& [name, s] : constants.source) src[name] = s;
  for (const auto& [name, v] : constants.estimates) est[name] = v;
  j["constant_source"] = src;
  j["checker_estimates"] = est;
  nlohmann::json consts = nlohmann::json::object();
  if (alpha) consts["alpha"] = *alpha;
  if (beta) consts["beta"] = *beta;
  if (c_lambda) consts["c_lambda"] = *c_lambda;
  consts["entropy_coeff"] = entropy_coeff;
  consts["initial_coeff"] = initial_coeff;
  j["constants"] = consts;
  j["lhs"] = {{"w2", lhs}, {"ci_lo", lhs_ci_lo}, {"ci_hi", lhs_ci_hi}, {"floor", floor}};
  j["entropy"] = {{"estimate", entropy}, {"se", entropy_se}};
  j["initial_w2"] = initial_w2;
  j["rhs"] = rhs;
  j["margin"] = margin;
  j["pass"] = pass;
  j["coupling"] = {{"w2", coupled_w2}, {"upper_bound", coupling_upper_bound}, {"domination", coupling_domination}};
  if (tail_slack) j["tail_slack"] = *tail_slack;
  j["samples"] = {{"n_paths", n_paths}, {"bootstrap", bootstrap}, {"dirac_initial", dirac_initial}};
  j["solver"] = {{"name", solver}};
  if (epsilon) j["solver"]["epsilon"] = *epsilon;
  return j;
}

std::string TCIReport::csv_header() {
  return "inequality,metric,T,tau,dt,lambda,n_paths,entropy,entropy_se,initial_w2,entropy_coeff,initial_coeff,rhs,"
         "lhs,lhs_ci_lo,lhs_ci_hi,floor,margin,pass,coupled_w2,coupling_upper_bound,tail_slack";
}

std::string TCIReport::csv_row() const {
  std::string row = to_string(id) + "," + metric;
  char buf[64];
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    row += buf;
  };
  add(T);
  add(tau);
  add(dt);
  add(lambda);
  row += "," + std::to_string(n_paths);
  for (double v : {entropy, entropy_se, initial_w2, entropy_coeff, initial_coeff, rhs, lhs, lhs_ci_lo, lhs_ci_hi,
                   floor, margin}) {
    add(v);
  }
  row += pass ? ",1" : ",0";
  add(coupled_w2);
  add(coupling_upper_bound);
  if (tail_slack) {
    add(*tail_slack);
  } else {
    row += ",";
  }
  return row;
}

}  // namespace nfsde
