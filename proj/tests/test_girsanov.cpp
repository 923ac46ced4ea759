#include <cmath>

#include "doctest.h"
#include "nfsde/girsanov.hpp"
#include "nfsde/stats.hpp"

using namespace nfsde;

namespace {

SimConfig brownian_sim(int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_paths = n;
  cfg.seed = seed;
  return cfg;
}

InitialLaw origin(const SimConfig& cfg) { return InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Zero(1))); }

}  // namespace

TEST_CASE("constant tilt entropy is |h|^2 T / 2") {
  const SimConfig cfg = brownian_sim(64, 3);
  for (double h : {0.0, 0.25, 1.5}) {
    const auto r = coupled_simulate(brownian_coefficients(1), origin(cfg), cfg,
                                    GirsanovTilt::constant(Vector::Constant(1, h), std::abs(h)));
    const auto e = relative_entropy(r);
    CHECK(std::abs(e.value - 0.5 * h * h * cfg.T) <= 1e-14 * (1.0 + h * h));
    // Under a constant shift the coupled paths differ by exactly h t.
    for (double d : r.sup_diff) CHECK(d == doctest::Approx(std::abs(h) * cfg.T).epsilon(1e-12));
  }
}

TEST_CASE("density has mean one under P") {
  const SimConfig cfg = brownian_sim(10000, 8);
  const auto tilt = GirsanovTilt::feedback_tanh(Vector::Constant(1, 0.8), 0.8);
  const auto logf = observed_log_density(brownian_coefficients(1), origin(cfg), cfg, tilt, 7);
  std::vector<double> f;
  for (double l : logf) f.push_back(std::exp(l));
  const auto m = mean_se(f);
  CHECK(std::abs(m.mean - 1.0) < 3 * m.se);
}

TEST_CASE("importance weights recover the Gaussian shift") {
  const SimConfig cfg = brownian_sim(10000, 21);
  const double h = 0.5;
  const auto tilt = GirsanovTilt::constant(Vector::Constant(1, h), h);
  const PathFunctional endpoint = [](const SegmentPath& p) { return p.value_at_step(p.n_steps())(0); };
  const auto rep = importance_check(brownian_coefficients(1), origin(cfg), cfg, tilt, endpoint);
  CHECK(std::abs(rep.z_score) < 3.0);
  CHECK(std::abs(rep.density_z) < 3.0);
  // Under the tilted law X(T) ~ N(h T, T).
  CHECK(std::abs(rep.weighted_mean - h * cfg.T) < 3 * rep.weighted_se);
  CHECK(std::abs(rep.tilted_mean - h * cfg.T) < 3 * rep.tilted_se);
  CHECK_FALSE(rep.low_ess);
}

TEST_CASE("clipping is counted") {
  const SimConfig cfg = brownian_sim(8, 2);
  const auto tilt = GirsanovTilt::constant(Vector::Constant(1, 2.0), 1.0);
  const auto r = coupled_simulate(brownian_coefficients(1), origin(cfg), cfg, tilt);
  for (int c : r.clipped_steps) CHECK(c == cfg.n_steps());
  CHECK(relative_entropy(r).value == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("summary keys") {
  const SimConfig cfg = brownian_sim(16, 2);
  const auto r = coupled_simulate(brownian_coefficients(1), origin(cfg), cfg, GirsanovTilt::zero(1));
  const auto s = r.summary();
  CHECK(s["entropy"].get<double>() == 0.0);
  CHECK(s["sup_diff"]["max"].get<double>() == 0.0);
  CHECK(s["n_paths"].get<int>() == 16);
}
