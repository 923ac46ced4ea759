#include "nfsde/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "nfsde/errors.hpp"
#include "nfsde/parallel.hpp"
#include "nfsde/rng.hpp"
#include "nfsde/stats.hpp"

namespace nfsde {

namespace {

double sup_pointwise(const SegmentPath& a, const SegmentPath& b) {
  double best = 0.0;
  for (int k = a.n_tau(); k < a.points(); ++k) best = std::max(best, (a.at(k) - b.at(k)).norm());
  return best;
}

}  // namespace

std::vector<double> CouplingResult::paired_distances(const PathMetric& metric) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = metric(x_paths.paths[i], y_paths.paths[i]);
  return out;
}

nlohmann::json CouplingResult::summary() const {
  nlohmann::json j;
  j["n_paths"] = size();
  j["horizon"] = horizon;
  j["entropy"] = entropy_estimate;
  j["entropy_se"] = entropy_se;
  j["sup_diff"] = {{"median", quantile(sup_diff, 0.5)},
                   {"q90", quantile(sup_diff, 0.9)},
                   {"q99", quantile(sup_diff, 0.99)},
                   {"max", sup_diff.empty() ? 0.0 : *std::max_element(sup_diff.begin(), sup_diff.end())},
                   {"rms", std::sqrt(mean_se([&] {
                             std::vector<double> sq(sup_diff.size());
                             for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = sup_diff[i] * sup_diff[i];
                             return sq;
                           }()).mean)}};
  int clipped = 0;
  for (int c : clipped_steps) clipped += c;
  j["clipped_steps"] = clipped;
  return j;
}

void CouplingResult::write_csv(std::ostream& os) const {
  char buf[160];
  os << "index,seed,log_density,h_energy,sup_diff\n";
  for (std::size_t i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g\n", i,
                  static_cast<unsigned long long>(x_paths.seeds[i]), log_density[i], h_energy[i], sup_diff[i]);
    os << buf;
  }
}

CouplingResult coupled_simulate(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                                const GirsanovTilt& tilt, std::uint64_t purpose, std::uint64_t initial_offset) {
  if (!std::isfinite(tilt.h_bound)) throw DomainError("tilt must be bounded");
  if (tilt.noise_dim != coeffs.noise_dim) throw DomainError("tilt dimension does not match the noise");
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  const int n_steps = cfg.n_steps();

  std::vector<std::optional<SegmentPath>> xs(n), ys(n);
  std::vector<std::uint64_t> seeds(n);
  CouplingResult r;
  r.log_density.assign(n, 0.0);
  r.h_energy.assign(n, 0.0);
  r.sup_diff.assign(n, 0.0);
  r.clipped_steps.assign(n, 0);
  r.horizon = cfg.T;

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    seeds[i] = path_seed(cfg.seed, purpose, i);
    const NoiseStream noise(seeds[i], coeffs.noise_dim, cfg.dt, n_steps);
    const Segment xi = initial.draw(initial_offset + i);
    TiltTrace trace;
    xs[i].emplace(simulate_path(coeffs, xi, cfg, noise, &tilt, TiltUse::apply, &trace));
    ys[i].emplace(simulate_path(coeffs, xi, cfg, noise));
    // The stream increments are those of W~; pairing with them gives int <h, dW~>.
    r.log_density[i] = trace.noise_pairing + 0.5 * trace.h_energy;
    r.h_energy[i] = trace.h_energy;
    r.clipped_steps[i] = trace.clipped_steps;
    r.sup_diff[i] = sup_pointwise(*xs[i], *ys[i]);
  });

  std::vector<SegmentPath> xp, yp;
  xp.reserve(n);
  yp.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    xp.push_back(std::move(*xs[i]));
    yp.push_back(std::move(*ys[i]));
  }
  r.x_paths = PathEnsemble::uniform(std::move(xp), seeds);
  r.y_paths = PathEnsemble::uniform(std::move(yp), std::move(seeds));
  const EntropyEstimate e = relative_entropy(r);
  r.entropy_estimate = e.value;
  r.entropy_se = e.std_error;
  return r;
}

EntropyEstimate relative_entropy(const CouplingResult& result) {
  if (result.h_energy.empty()) throw EstimationError("entropy of an empty coupling");
  std::vector<double> half(result.h_energy.size());
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = 0.5 * result.h_energy[i];
  const MeanSe m = mean_se(half);
  return {m.mean, m.se};
}

std::vector<double> observed_log_density(const CoefficientSet& coeffs, const InitialLaw& initial,
                                         const SimConfig& cfg, const GirsanovTilt& tilt, std::uint64_t purpose,
                                         std::uint64_t initial_offset, PathEnsemble* paths) {
  if (tilt.noise_dim != coeffs.noise_dim) throw DomainError("tilt dimension does not match the noise");
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  const int n_steps = cfg.n_steps();
  std::vector<double> logf(n, 0.0);
  std::vector<std::optional<SegmentPath>> keep(paths ? n : 0);
  std::vector<std::uint64_t> seeds(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    seeds[i] = path_seed(cfg.seed, purpose, i);
    const NoiseStream noise(seeds[i], coeffs.noise_dim, cfg.dt, n_steps);
    TiltTrace trace;
    SegmentPath p = simulate_path(coeffs, initial.draw(initial_offset + i), cfg, noise, &tilt, TiltUse::observe, &trace);
    logf[i] = trace.noise_pairing - 0.5 * trace.h_energy;
    if (paths) keep[i].emplace(std::move(p));
  });
  if (paths) {
    std::vector<SegmentPath> v;
    v.reserve(n);
    for (auto& p : keep) v.push_back(std::move(*p));
    *paths = PathEnsemble::uniform(std::move(v), std::move(seeds));
  }
  return logf;
}

nlohmann::json ImportanceReport::to_json() const {
  return {{"n_paths", n_paths},
          {"weighted_mean", weighted_mean},
          {"weighted_se", weighted_se},
          {"tilted_mean", tilted_mean},
          {"tilted_se", tilted_se},
          {"z_score", z_score},
          {"density_mean", density_mean},
          {"density_se", density_se},
          {"density_z", density_z},
          {"ess", ess},
          {"ess_fraction", ess_fraction},
          {"low_ess", low_ess}};
}

ImportanceReport importance_check(const CoefficientSet& coeffs, const InitialLaw& initial, const SimConfig& cfg,
                                  const GirsanovTilt& tilt, const PathFunctional& phi, double min_ess_fraction) {
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  PathEnsemble p_paths;
  const auto logf = observed_log_density(coeffs, initial, cfg, tilt, static_cast<std::uint64_t>(StreamPurpose::importance),
                                         n, &p_paths);
  const CouplingResult q = coupled_simulate(coeffs, initial, cfg, tilt);

  std::vector<double> f(n), fphi(n), qphi(n);
  double sum_f = 0.0, sum_f2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = std::exp(logf[i]);
    fphi[i] = f[i] * phi(p_paths.paths[i]);
    qphi[i] = phi(q.x_paths.paths[i]);
    sum_f += f[i];
    sum_f2 += f[i] * f[i];
  }
  ImportanceReport r;
  r.n_paths = n;
  const MeanSe w = mean_se(fphi), t = mean_se(qphi), d = mean_se(f);
  r.weighted_mean = w.mean;
  r.weighted_se = w.se;
  r.tilted_mean = t.mean;
  r.tilted_se = t.se;
  const double se = std::hypot(w.se, t.se);
  r.z_score = se > 0.0 ? (w.mean - t.mean) / se : (w.mean == t.mean ? 0.0 : INFINITY);
  r.density_mean = d.mean;
  r.density_se = d.se;
  r.density_z = d.se > 0.0 ? (d.mean - 1.0) / d.se : (std::abs(d.mean - 1.0) < 1e-12 ? 0.0 : INFINITY);
  r.ess = sum_f2 > 0.0 ? sum_f * sum_f / sum_f2 : 0.0;
  r.ess_fraction = r.ess / static_cast<double>(n);
  r.low_ess = r.ess_fraction < min_ess_fraction;
  return r;
}

}  // namespace nfsde
