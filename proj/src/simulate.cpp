#include "nfsde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "nfsde/errors.hpp"
#include "nfsde/parallel.hpp"
#include "nfsde/rng.hpp"

namespace nfsde {

void SimConfig::validate(std::optional<double> kappa, const CoefficientSet* coeffs) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sim.dt", "must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("sim.T", "must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("sim.tau", "must be positive");
  try {
    (void)n_tau();
  } catch (const DomainError&) {
    throw ValidationError("sim.tau", "must be an integer multiple of dt");
  }
  try {
    (void)n_steps();
  } catch (const DomainError&) {
    throw ValidationError("sim.T", "must be an integer multiple of dt");
  }
  if (dim < 1) throw ValidationError("sim.d", "must be >= 1");
  if (noise_dim < 1) throw ValidationError("sim.m", "must be >= 1");
  if (n_paths < 1) throw ValidationError("sim.n_paths", "must be >= 1");
  if (!(fp_tol > 0.0)) throw ValidationError("sim.fp_tol", "must be positive");
  if (fp_max_iter < 1) throw ValidationError("sim.fp_max_iter", "must be >= 1");
  if (threads < 0) throw ValidationError("threads", "must be >= 0");
  if (kappa) {
    if (!(*kappa >= 0.0 && *kappa < 1.0)) {
      throw ValidationError("model.kappa", "(A1) requires kappa in [0, 1) for the fixed-point solve");
    }
    if (*kappa > 0.0) {
      const int need = static_cast<int>(std::ceil(std::log(fp_tol) / std::log(*kappa))) + 10;
      fp_max_iter = std::max(fp_max_iter, need);
    }
  }
  if (coeffs) {
    if (coeffs->dim != dim) throw ValidationError("sim.d", "does not match the model dimension");
    if (coeffs->noise_dim != noise_dim) throw ValidationError("sim.m", "does not match the model noise dimension");
    if (coeffs->A_diag) {
      for (int i = 0; i < coeffs->A_diag->size(); ++i) {
        const double a = -(*coeffs->A_diag)(i);
        if (!(a > 0.0)) throw ValidationError("model.A", "diagonal entries must be strictly negative");
        if (!(a * dt < 1.0)) throw ValidationError("model.A", "explicit Euler guard a * dt < 1 violated");
      }
    }
  }
}

// ---------------------------------------------------------------------------

NoiseStream::NoiseStream(std::uint64_t path_seed, int noise_dim, double fine_dt, int steps, int coarsen)
    : seed_(path_seed), m_(noise_dim), fine_dt_(fine_dt), steps_(steps), coarsen_(coarsen) {
  if (noise_dim < 1) throw DomainError("noise dimension must be >= 1");
  if (!(fine_dt > 0.0)) throw DomainError("noise step must be positive");
  if (steps < 0 || coarsen < 1) throw DomainError("noise stream needs steps >= 0 and coarsen >= 1");
}

void NoiseStream::fine_increment_add(std::int64_t fine_step, std::span<double> out) const {
  const auto key = Philox4x32::key_from(seed_);
  const double scale = std::sqrt(fine_dt_);
  const auto s = static_cast<std::uint64_t>(fine_step);
  for (int block = 0; 2 * block < m_; ++block) {
    const auto z = gaussian_pair(Philox4x32::block(
        {static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32), static_cast<std::uint32_t>(block), 0U},
        key));
    out[static_cast<std::size_t>(2 * block)] += scale * z[0];
    if (2 * block + 1 < m_) out[static_cast<std::size_t>(2 * block + 1)] += scale * z[1];
  }
}

void NoiseStream::increment(int step, std::span<double> out) const {
  if (step < 0 || step >= steps_) throw DomainError("noise step out of range");
  if (out.size() != static_cast<std::size_t>(m_)) throw DomainError("noise buffer has the wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  const std::int64_t first = static_cast<std::int64_t>(step) * coarsen_;
  for (int j = 0; j < coarsen_; ++j) fine_increment_add(first + j, out);
}

Vector NoiseStream::increment(int step) const {
  Vector v(m_);
  increment(step, std::span<double>(v.data(), static_cast<std::size_t>(m_)));
  return v;
}

NoiseStream NoiseStream::coarsened(int factor) const {
  if (factor < 1 || steps_ % factor != 0) throw DomainError("coarsening factor must divide the step count");
  return NoiseStream(seed_, m_, fine_dt_, steps_ / factor, coarsen_ * factor);
}

// ---------------------------------------------------------------------------

namespace {

/// Advances one step in place. `buf` holds n_tau + 2 points: the current
/// window followed by the slot for the new endpoint.
void step_in_place(const CoefficientSet& coeffs, std::span<double> buf, int n_tau, double dt, const Vector& dW,
                   double fp_tol, int fp_max_iter, const Vector* control, StepStats* stats) {
  const int d = coeffs.dim;
  const SegmentView cur(std::span<const double>(buf.data(), static_cast<std::size_t>(n_tau + 1) * d), n_tau, d, dt);
  const ConstPoint x = cur.endpoint();

  const Matrix sig = coeffs.sigma(cur);
  Vector drift = coeffs.b(cur);
  if (coeffs.A_diag) drift += coeffs.A_diag->cwiseProduct(x);
  if (control) drift += sig * *control;
  Vector m = x + drift * dt + sig * dW;
  if (!coeffs.neutral_free) m -= coeffs.G(cur);
  if (!m.allFinite()) throw NumericError("non-finite value in the Euler step");

  double* slot = buf.data() + static_cast<std::ptrdiff_t>(n_tau + 1) * d;
  Eigen::Map<Vector> next(slot, d);
  if (coeffs.neutral_free) {
    next = m;
    if (stats) *stats = StepStats{1, 0.0, 0.0};
    return;
  }

  const SegmentView ahead(std::span<const double>(buf.data() + d, static_cast<std::size_t>(n_tau + 1) * d), n_tau, d,
                          dt);
  next = x;
  double prev_change = 0.0;
  double max_ratio = 0.0;
  for (int it = 1; it <= fp_max_iter; ++it) {
    const Vector candidate = m + coeffs.G(ahead);
    if (!candidate.allFinite()) throw NumericError("non-finite value in the neutral fixed point");
    const double change = (candidate - next).norm();
    next = candidate;
    // Ratios of changes near rounding level say nothing about the contraction.
    const double scale = std::max(1.0, candidate.norm());
    if (it > 1 && prev_change > 1e-5 * scale) max_ratio = std::max(max_ratio, change / prev_change);
    prev_change = change;
    if (change <= fp_tol * scale) {
      if (stats) *stats = StepStats{it, max_ratio, change};
      return;
    }
  }
  throw ConvergenceError("neutral fixed point did not converge", prev_change);
}

}  // namespace

Vector euler_step(const CoefficientSet& coeffs, const SegmentView& current, const Vector& dW, double dt,
                  double fp_tol, int fp_max_iter, const Vector* control, StepStats* stats) {
  if (current.dim() != coeffs.dim) throw DomainError("segment dimension does not match the coefficients");
  if (dW.size() != coeffs.noise_dim) throw DomainError("noise increment has the wrong dimension");
  const int n_tau = current.n_tau();
  const int d = current.dim();
  std::vector<double> buf(static_cast<std::size_t>(n_tau + 2) * d);
  std::copy(current.raw().begin(), current.raw().end(), buf.begin());
  step_in_place(coeffs, buf, n_tau, dt, dW, fp_tol, fp_max_iter, control, stats);
  return Eigen::Map<const Vector>(buf.data() + static_cast<std::ptrdiff_t>(n_tau + 1) * d, d);
}

SegmentPath simulate_path(const CoefficientSet& coeffs, const Segment& initial, const SimConfig& cfg,
                          const NoiseStream& noise, const GirsanovTilt* tilt, TiltUse use, TiltTrace* trace) {
  const int n_tau = cfg.n_tau();
  const int n_steps = cfg.n_steps();
  const int d = coeffs.dim;
  if (initial.dim() != d || initial.n_tau() != n_tau || std::abs(initial.dt() - cfg.dt) > 1e-12 * cfg.dt) {
    throw DomainError("initial segment is not on the simulation grid");
  }
  if (noise.noise_dim() != coeffs.noise_dim || noise.steps() < n_steps ||
      std::abs(noise.dt() - cfg.dt) > 1e-9 * cfg.dt) {
    throw DomainError("noise stream does not match the simulation grid");
  }
  if (tilt && tilt->noise_dim != coeffs.noise_dim) throw DomainError("tilt dimension does not match the noise");

  SegmentPath path = SegmentPath::with_initial(initial, n_steps);
  auto& values = path.mutable_values();
  Vector dW(coeffs.noise_dim);
  Vector h;
  TiltTrace local;
  StepStats stats;
  for (int i = 0; i < n_steps; ++i) {
    noise.increment(i, std::span<double>(dW.data(), static_cast<std::size_t>(dW.size())));
    std::span<double> buf(values.data() + static_cast<std::ptrdiff_t>(i) * d, static_cast<std::size_t>(n_tau + 2) * d);
    const Vector* control = nullptr;
    if (tilt && !tilt->is_zero()) {
      bool clipped = false;
      h = tilt->evaluate(i * cfg.dt, path.window(i), clipped);
      local.h_energy += h.squaredNorm() * cfg.dt;
      local.noise_pairing += h.dot(dW);
      if (clipped) ++local.clipped_steps;
      if (use == TiltUse::apply) control = &h;
    }
    step_in_place(coeffs, buf, n_tau, cfg.dt, dW, cfg.fp_tol, cfg.fp_max_iter, control, &stats);
    local.fp_iterations += stats.iterations;
    local.max_fp_ratio = std::max(local.max_fp_ratio, stats.max_ratio);
  }
  if (trace) *trace = local;
  return path;
}

InitialLaw InitialLaw::point(Segment xi) {
  InitialLaw law;
  law.dirac = true;
  law.draw = [xi = std::move(xi)](std::uint64_t) { return xi; };
  return law;
}

InitialLaw InitialLaw::random(SegmentSampler sampler, std::uint64_t seed, std::optional<Vector> mean) {
  InitialLaw law;
  law.dirac = false;
  law.draw = [sampler, seed, mean](std::uint64_t index) {
    Segment s = sampler.draw(derive_seed(seed, StreamPurpose::initial_law, index));
    if (!mean) return s;
    std::vector<double> v = s.values();
    const int d = s.dim();
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += (*mean)(static_cast<int>(j % d));
    return Segment(s.dt(), s.n_tau(), d, std::move(v));
  };
  return law;
}

std::uint64_t path_seed(std::uint64_t root, std::uint64_t purpose, std::uint64_t index) {
  return derive_seed(root, purpose, index);
}

PathEnsemble simulate_ensemble(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                               const GirsanovTilt* tilt, std::uint64_t purpose, std::uint64_t initial_offset) {
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  const int n_steps = cfg.n_steps();
  std::vector<std::optional<SegmentPath>> slots(n);
  std::vector<std::uint64_t> seeds(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    seeds[i] = path_seed(cfg.seed, purpose, i);
    const NoiseStream noise(seeds[i], coeffs.noise_dim, cfg.dt, n_steps);
    slots[i].emplace(simulate_path(coeffs, initial.draw(initial_offset + i), cfg, noise, tilt));
  });
  std::vector<SegmentPath> paths;
  paths.reserve(n);
  for (auto& s : slots) paths.push_back(std::move(*s));
  return PathEnsemble::uniform(std::move(paths), std::move(seeds));
}

// ---------------------------------------------------------------------------

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors) {
  if (dts.size() != errors.size() || dts.size() < 2) throw DomainError("order fit needs at least two levels");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(dts.size());
  for (std::size_t i = 0; i < dts.size(); ++i) {
    if (!(dts[i] > 0.0) || !(errors[i] > 0.0)) throw EstimationError("order fit needs positive errors");
    const double x = std::log(dts[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceStudy strong_convergence(const CoefficientSet& coeffs, const std::function<Vector(double)>& initial,
                                    double tau, double T, const std::vector<double>& dts, int refinement,
                                    int n_paths, std::uint64_t seed, int threads) {
  if (dts.size() < 2) throw DomainError("convergence study needs at least two step sizes");
  if (refinement < 1 || n_paths < 1) throw DomainError("convergence study needs refinement >= 1 and n_paths >= 1");
  const double dt_ref = *std::min_element(dts.begin(), dts.end()) / refinement;
  SimConfig ref_cfg;
  ref_cfg.T = T;
  ref_cfg.dt = dt_ref;
  ref_cfg.tau = tau;
  ref_cfg.dim = coeffs.dim;
  ref_cfg.noise_dim = coeffs.noise_dim;
  const int ref_steps = ref_cfg.n_steps();
  (void)ref_cfg.n_tau();

  std::vector<SimConfig> level_cfg;
  std::vector<int> factors;
  std::vector<Segment> level_init;
  for (double dt : dts) {
    SimConfig c = ref_cfg;
    c.dt = dt;
    (void)c.n_tau();
    factors.push_back(grid_steps(dt, dt_ref, "dt"));
    level_init.push_back(Segment::from_function(dt, tau, coeffs.dim, initial));
    level_cfg.push_back(c);
  }
  const Segment ref_init = Segment::from_function(dt_ref, tau, coeffs.dim, initial);

  const auto n = static_cast<std::size_t>(n_paths);
  const std::size_t levels = dts.size();
  std::vector<double> sq(n * levels);
  parallel_for(n, threads, [&](std::size_t p) {
    const NoiseStream fine(path_seed(seed, static_cast<std::uint64_t>(StreamPurpose::noise), p), coeffs.noise_dim,
                           dt_ref, ref_steps);
    const SegmentPath ref = simulate_path(coeffs, ref_init, ref_cfg, fine);
    const Vector x_ref = ref.value_at_step(ref.n_steps());
    for (std::size_t l = 0; l < levels; ++l) {
      const SegmentPath coarse = simulate_path(coeffs, level_init[l], level_cfg[l], fine.coarsened(factors[l]));
      sq[p * levels + l] = (coarse.value_at_step(coarse.n_steps()) - x_ref).squaredNorm();
    }
  });

  ConvergenceStudy out;
  out.dts = dts;
  out.reference_dt = dt_ref;
  out.errors.assign(levels, 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) acc += sq[p * levels + l];
    out.errors[l] = std::sqrt(acc / static_cast<double>(n));
  }
  out.observed_order = fitted_order(out.dts, out.errors);
  return out;
}

}  // namespace nfsde
