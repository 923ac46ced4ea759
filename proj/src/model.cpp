#include "nfsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "nfsde/errors.hpp"
#include "nfsde/parallel.hpp"
#include "nfsde/rng.hpp"

namespace nfsde {

namespace {

void check_weights(const std::vector<double>& w, int n_tau, const char* what, bool probability) {
  if (w.empty()) return;
  if (w.size() != static_cast<std::size_t>(n_tau + 1)) {
    throw DomainError(std::string(what) + " must have one weight per segment grid point");
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be nonnegative");
    total += x;
  }
  if (probability && std::abs(total - 1.0) > 1e-9) throw DomainError(std::string(what) + " must sum to 1");
}

double total_mass(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) s += x;
  return s;
}

double max_sup_difference(const SegmentView& a, const SegmentView& b) { return rho_uniform(a, b); }

}  // namespace

void CoefficientSet::validate(int n_tau) const {
  if (dim < 1 || noise_dim < 1) throw DomainError("coefficients need dim >= 1 and noise_dim >= 1");
  if (!G || !b || !sigma) throw DomainError("coefficients need G, b and sigma evaluators");
  if (A_diag) {
    if (A_diag->size() != dim) throw DomainError("A must be d x d");
    for (int i = 0; i < dim; ++i) {
      if (!((*A_diag)(i) < 0.0)) throw DomainError("A must have strictly negative diagonal entries");
    }
  }
  const auto& c = declared;
  if (c.kappa && !(*c.kappa >= 0.0 && *c.kappa < 1.0)) throw DomainError("(A1) requires kappa in [0, 1)");
  if (c.k && !(*c.k >= 0.0 && *c.k < 1.0)) throw DomainError("(B1) requires k in [0, 1)");
  if (c.lambda2 && !(*c.lambda2 >= 0.0)) throw DomainError("(A2) requires lambda2 >= 0");
  if (c.lambda3 && !(*c.lambda3 > 0.0)) throw DomainError("(A3) requires lambda3 > 0");
  if (c.k2 && !(*c.k2 >= 0.0)) throw DomainError("(B2) requires k2 >= 0");
  check_weights(c.delay_weights, n_tau, "delay measure", true);
}

double CoefficientSet::spectral_gap() const {
  if (!A_diag) return 0.0;
  return (-*A_diag).minCoeff();
}

std::vector<double> uniform_delay_weights(int n_tau) {
  std::vector<double> w(static_cast<std::size_t>(n_tau + 1), 1.0 / n_tau);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

std::vector<double> endpoint_delay_weights(int n_tau) {
  std::vector<double> w(static_cast<std::size_t>(n_tau + 1), 0.0);
  w.back() = 1.0;
  return w;
}

Vector integrate_weights(const SegmentView& seg, const std::vector<double>& weights) {
  Vector acc = Vector::Zero(seg.dim());
  for (int j = 0; j < seg.points(); ++j) {
    const double w = weights[static_cast<std::size_t>(j)];
    if (w != 0.0) acc += w * seg.at(j);
  }
  return acc;
}

Vector segment_mean(const SegmentView& seg) {
  const int n = seg.n_tau();
  Vector acc = 0.5 * (seg.at(0) + seg.at(n));
  for (int j = 1; j < n; ++j) acc += seg.at(j);
  return acc / n;
}

CoefficientSet linear_coefficients(const LinearExample& ex, int n_tau) {
  if (!(ex.k > 0.0 && ex.k < 1.0)) throw DomainError("linear example requires k in (0, 1)");
  if (ex.dim < 1) throw DomainError("linear example requires dim >= 1");
  check_weights(ex.lambda1_weights, n_tau, "Lambda1", false);
  check_weights(ex.lambda2_weights, n_tau, "Lambda2", false);
  if (ex.sigma_cap && !(*ex.sigma_cap > 0.0)) throw DomainError("sigma cap must be positive");

  CoefficientSet c;
  c.name = "linear";
  c.dim = ex.dim;
  c.noise_dim = ex.dim;
  const double k = ex.k;
  c.G = [k](const SegmentView& s) -> Vector { return k * segment_mean(s); };
  const double c1 = ex.c1;
  const auto l1 = ex.lambda1_weights;
  c.b = [c1, l1](const SegmentView& s) -> Vector {
    Vector v = c1 * s.endpoint();
    if (!l1.empty()) v += integrate_weights(s, l1);
    return v;
  };
  const double c3 = ex.c3;
  const auto l2 = ex.lambda2_weights;
  const auto cap = ex.sigma_cap;
  c.sigma = [c3, l2, cap](const SegmentView& s) -> Matrix {
    Vector v = c3 * s.endpoint();
    if (!l2.empty()) v += integrate_weights(s, l2);
    // Projection onto the operator-norm ball: clip the singular values |v_i|.
    if (cap) v = v.cwiseMax(-*cap).cwiseMin(*cap);
    return v.asDiagonal();
  };

  c.declared.k = k;
  c.declared.kappa = k;
  const double l2_mass = total_mass(ex.lambda2_weights);
  c.declared.lambda2 = (std::abs(c3) + l2_mass) * (std::abs(c3) + l2_mass);
  if (cap) c.declared.lambda3 = std::max(*cap, *cap * *cap);
  if (total_mass(ex.lambda1_weights) == 0.0 && l2_mass == 0.0) {
    // 2<a - g, c1 a> + c3^2 |a|^2 with |g| <= k rho_2, Young with weight k.
    c.declared.k1 = -2.0 * c1 - c3 * c3 - std::abs(c1) * k;
    c.declared.k2 = std::abs(c1) * k;
    c.declared.delay_weights = uniform_delay_weights(n_tau);
  }
  return c;
}

CoefficientSet zero_coefficients(int dim, int noise_dim) {
  CoefficientSet c;
  c.name = "zero";
  c.dim = dim;
  c.noise_dim = noise_dim;
  c.G = [dim](const SegmentView&) -> Vector { return Vector::Zero(dim); };
  c.b = c.G;
  c.sigma = [dim, noise_dim](const SegmentView&) -> Matrix { return Matrix::Zero(dim, noise_dim); };
  c.neutral_free = true;
  c.declared.kappa = 0.0;
  c.declared.k = 0.0;
  c.declared.lambda1 = 0.0;
  c.declared.lambda2 = 0.0;
  return c;
}

CoefficientSet brownian_coefficients(int dim, double scale) {
  CoefficientSet c = zero_coefficients(dim, dim);
  c.name = "brownian";
  c.sigma = [dim, scale](const SegmentView&) -> Matrix { return scale * Matrix::Identity(dim, dim); };
  c.declared.lambda3 = std::max(std::abs(scale), scale * scale);
  return c;
}

CoefficientSet linear_delay_coefficients(double a, double c_delay, double s, bool multiplicative) {
  CoefficientSet c;
  c.name = multiplicative ? "linear-delay-multiplicative" : "linear-delay";
  c.dim = 1;
  c.noise_dim = 1;
  c.G = [](const SegmentView&) -> Vector { return Vector::Zero(1); };
  c.b = [a, c_delay](const SegmentView& x) -> Vector { return -a * x.endpoint() + c_delay * x.start(); };
  if (multiplicative) {
    c.sigma = [s](const SegmentView& x) -> Matrix { return Matrix::Constant(1, 1, s * x.endpoint()(0)); };
  } else {
    c.sigma = [s](const SegmentView&) -> Matrix { return Matrix::Constant(1, 1, s); };
  }
  c.neutral_free = true;
  c.declared.kappa = 0.0;
  c.declared.k = 0.0;
  return c;
}

CoefficientSet delayed_neutral_coefficients(int dim, double kappa, double s) {
  CoefficientSet c;
  c.name = "delayed-neutral";
  c.dim = dim;
  c.noise_dim = dim;
  c.G = [kappa](const SegmentView& x) -> Vector { return kappa * x.start(); };
  c.b = [](const SegmentView& x) -> Vector { return -x.endpoint(); };
  c.sigma = [dim, s](const SegmentView&) -> Matrix { return s * Matrix::Identity(dim, dim); };
  c.declared.kappa = kappa;
  return c;
}

CoefficientSet with_stiff_drift(CoefficientSet base, const Vector& A_diag) {
  base.A_diag = A_diag;
  base.name += "+A";
  return base;
}

// ---------------------------------------------------------------------------

SegmentSampler::SegmentSampler(double dt, double tau, int dim, double scale)
    : dt_(dt), n_tau_(grid_steps(tau, dt, "tau")), dim_(dim), scale_(scale) {
  if (n_tau_ < 1) throw DomainError("sampler needs tau >= dt");
  if (dim < 1) throw DomainError("sampler needs dim >= 1");
  if (!(scale > 0.0)) throw DomainError("sampler scale must be positive");
}

Segment SegmentSampler::draw(std::uint64_t seed) const {
  CounterRng rng(seed, 0);
  const int n = n_tau_;
  std::vector<double> v(static_cast<std::size_t>(n + 1) * dim_);
  const double step_sd = scale_ / std::sqrt(static_cast<double>(n));
  for (int c = 0; c < dim_; ++c) {
    const double left = scale_ * rng.normal();
    const double right = scale_ * rng.normal();
    std::vector<double> walk(static_cast<std::size_t>(n + 1), 0.0);
    for (int j = 1; j <= n; ++j) walk[static_cast<std::size_t>(j)] = walk[static_cast<std::size_t>(j - 1)] + step_sd * rng.normal();
    for (int j = 0; j <= n; ++j) {
      const double s = static_cast<double>(j) / n;
      const double bridge = walk[static_cast<std::size_t>(j)] - s * walk.back();
      v[static_cast<std::size_t>(j) * dim_ + c] = left + (right - left) * s + bridge;
    }
  }
  return Segment(dt_, n, dim_, std::move(v));
}

PairSampler::PairSampler(SegmentSampler base, std::uint64_t seed) : base_(std::move(base)), seed_(seed) {}

std::pair<Segment, Segment> PairSampler::draw(std::uint64_t index) const {
  return draw(index, static_cast<Shape>(index % 4));
}

std::pair<Segment, Segment> PairSampler::draw(std::uint64_t index, Shape shape) const {
  const std::uint64_t s = derive_seed(seed_, StreamPurpose::pair_sampler, index);
  Segment xi = base_.draw(splitmix64(s ^ 0x1ULL));
  const int n = base_.n_tau();
  const int d = base_.dim();
  std::vector<double> eta = xi.values();
  CounterRng rng(splitmix64(s ^ 0x2ULL), 1);
  switch (shape) {
    case Shape::independent:
      return {std::move(xi), base_.draw(splitmix64(s ^ 0x3ULL))};
    case Shape::constant_shift:
      for (int c = 0; c < d; ++c) {
        const double shift = base_.scale() * rng.normal();
        for (int j = 0; j <= n; ++j) eta[static_cast<std::size_t>(j) * d + c] += shift;
      }
      break;
    case Shape::endpoint_only:
      for (int c = 0; c < d; ++c) eta[static_cast<std::size_t>(n) * d + c] += base_.scale() * rng.normal();
      break;
    case Shape::bulk_only: {
      const Segment bump = base_.draw(splitmix64(s ^ 0x4ULL));
      for (int j = 0; j <= n; ++j) {
        for (int c = 0; c < d; ++c) {
          eta[static_cast<std::size_t>(j) * d + c] += bump.at(j)(c) - bump.at(n)(c);
        }
      }
      break;
    }
  }
  Segment other(xi.dt(), n, d, std::move(eta));
  return {std::move(xi), std::move(other)};
}

// ---------------------------------------------------------------------------

LipschitzEstimate estimate_A1(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n,
                              LipschitzNorm norm, int threads) {
  if (n < 2) throw EstimationError("Lipschitz estimate needs at least 2 pairs");
  std::vector<double> ratio(n, -1.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto [xi, eta] = sampler.draw(i);
    const double denom = norm == LipschitzNorm::uniform ? rho_uniform(xi, eta) : rho_2(xi, eta);
    if (!(denom > 1e-300)) return;
    ratio[i] = (coeffs.G(xi) - coeffs.G(eta)).norm() / denom;
  });
  LipschitzEstimate out;
  for (double r : ratio) {
    if (r < 0.0) continue;
    ++out.pairs_used;
    out.estimate = std::max(out.estimate, r);
  }
  if (out.pairs_used == 0) throw EstimationError("all sampled pairs are degenerate");
  out.violates_contraction = out.estimate >= 1.0 - 1e-12;
  return out;
}

double hs_difference_squared(const CoefficientSet& coeffs, const SegmentView& xi, const SegmentView& eta) {
  return (coeffs.sigma(xi) - coeffs.sigma(eta)).squaredNorm();
}

double dissipativity_form(const CoefficientSet& coeffs, const SegmentView& xi, const SegmentView& eta) {
  const Vector a = xi.endpoint() - eta.endpoint();
  const Vector g = coeffs.G(xi) - coeffs.G(eta);
  Vector drift = coeffs.b(xi) - coeffs.b(eta);
  if (coeffs.A_diag) drift += coeffs.A_diag->cwiseProduct(a);
  return 2.0 * (a - g).dot(drift) + hs_difference_squared(coeffs, xi, eta);
}

DissipativityEstimate estimate_A2_B2(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n,
                                     DissipativityMode mode, std::vector<double> delay_weights, int threads) {
  if (n < 2) throw EstimationError("dissipativity estimate needs at least 2 pairs");
  if (mode == DissipativityMode::weighted) {
    if (delay_weights.empty()) delay_weights = coeffs.declared.delay_weights;
    if (delay_weights.empty()) throw EstimationError("weighted mode needs a declared delay measure");
    check_weights(delay_weights, sampler.base().n_tau(), "delay measure", true);
  }

  struct Sample {
    double form = 0, x = 0, y = 0, hs = 0;
    bool used = false;
  };
  std::vector<Sample> s(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto [xi, eta] = sampler.draw(i);
    Sample& out = s[i];
    out.form = dissipativity_form(coeffs, xi, eta);
    out.hs = hs_difference_squared(coeffs, xi, eta);
    if (mode == DissipativityMode::uniform) {
      const double sup = max_sup_difference(xi, eta);
      out.x = sup * sup;
      out.used = out.x > 1e-300;
    } else {
      out.x = (xi.endpoint() - eta.endpoint()).squaredNorm();
      double y = 0.0;
      for (int j = 0; j < xi.points(); ++j) {
        y += delay_weights[static_cast<std::size_t>(j)] * (xi.at(j) - eta.at(j)).squaredNorm();
      }
      out.y = y;
      out.used = out.x > 1e-300 || out.y > 1e-300;
    }
    if (!std::isfinite(out.form)) throw NumericError("non-finite dissipativity form");
  });

  DissipativityEstimate est;
  est.mode = mode;
  for (const auto& x : s) est.samples_used += x.used ? 1 : 0;
  if (est.samples_used == 0) throw EstimationError("all sampled pairs are degenerate");

  if (mode == DissipativityMode::uniform) {
    double worst = -std::numeric_limits<double>::infinity();
    double l2 = 0.0;
    for (const auto& x : s) {
      if (!x.used) continue;
      worst = std::max(worst, x.form / x.x);
      l2 = std::max(l2, x.hs / x.x);
    }
    est.lambda1 = 0.0 - worst;
    est.lambda2 = l2;
    est.satisfied_fraction = 1.0;
    return est;
  }

  // Least squares for form ~ p x + q y, with p = -k1 and q = k2.
  double sxx = 0, sxy = 0, syy = 0, sxl = 0, syl = 0;
  for (const auto& x : s) {
    if (!x.used) continue;
    sxx += x.x * x.x;
    sxy += x.x * x.y;
    syy += x.y * x.y;
    sxl += x.x * x.form;
    syl += x.y * x.form;
  }
  double p = 0.0, q = 0.0;
  const double det = sxx * syy - sxy * sxy;
  if (det > 1e-12 * std::max(1e-300, sxx * syy)) {
    p = (sxl * syy - syl * sxy) / det;
    q = (syl * sxx - sxl * sxy) / det;
  } else if (sxx > 0.0) {
    p = sxl / sxx;
  } else {
    q = syl / syy;
  }
  q = std::max(q, 0.0);

  // Max-violation correction: first samples without an endpoint difference
  // (only k2 can cover them), then the rest through k1.
  for (const auto& x : s) {
    if (!x.used || x.x > 1e-300) continue;
    const double r = x.form - q * x.y;
    if (r > 0.0) q += r / x.y;
  }
  double bump = 0.0;
  for (const auto& x : s) {
    if (!x.used || !(x.x > 1e-300)) continue;
    const double r = x.form - (p * x.x + q * x.y);
    if (r > 0.0) bump = std::max(bump, r / x.x);
  }
  p += bump;
  // Absorb the rounding of the correction step.
  p += 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(p));
  q += 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(q));

  std::size_t ok = 0;
  for (const auto& x : s) {
    if (!x.used) continue;
    const double rhs = p * x.x + q * x.y;
    const double tol = 1e-12 * (std::abs(x.form) + std::abs(p * x.x) + std::abs(q * x.y));
    if (x.form <= rhs + tol) ++ok;
  }
  est.k1 = -p;
  est.k2 = q;
  est.satisfied_fraction = static_cast<double>(ok) / static_cast<double>(est.samples_used);
  return est;
}

A3Check check_A3(const CoefficientSet& coeffs, const PairSampler& sampler, std::size_t n, int threads) {
  if (n < 1) throw EstimationError("A3 check needs at least one sample");
  std::vector<double> norms(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto [xi, eta] = sampler.draw(i);
    double m = 0.0;
    for (const Segment* seg : {&xi, &eta}) {
      const Matrix sig = coeffs.sigma(*seg);
      if (sig.size() == 0) continue;
      Eigen::JacobiSVD<Matrix> svd(sig);
      m = std::max(m, svd.singularValues()(0));
    }
    norms[i] = m;
  });
  A3Check out;
  out.lambda3_hat = *std::max_element(norms.begin(), norms.end());
  out.declared = coeffs.declared.lambda3;
  const double need = std::max(out.lambda3_hat, out.lambda3_hat * out.lambda3_hat);
  out.pass = out.declared && *out.declared >= need * (1.0 - 1e-12);
  return out;
}

}  // namespace nfsde
