#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nfsde/config.hpp"
#include "nfsde/errors.hpp"
#include "nfsde/rng.hpp"
#include "nfsde/simulate.hpp"
#include "nfsde/stats.hpp"

using namespace nfsde;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using P = Philox4x32;
  CHECK(P::block({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(P::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        P::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(P::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        P::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("noise increments have the Brownian moments") {
  std::vector<double> x;
  for (std::uint64_t p = 0; p < 200; ++p) {
    const NoiseStream noise(path_seed(1, 1, p), 2, 0.01, 100);
    for (int s = 0; s < 100; ++s) {
      const Vector dw = noise.increment(s);
      x.push_back(dw(0) / 0.1);
      x.push_back(dw(1) / 0.1);
    }
  }
  const auto m = mean_se(x);
  double var = 0.0;
  for (double v : x) var += (v - m.mean) * (v - m.mean);
  var /= static_cast<double>(x.size() - 1);
  CHECK(std::abs(m.mean) < 4 * m.se);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("coarsened noise sums the fine increments") {
  const NoiseStream fine(42, 3, 0.01, 64);
  const NoiseStream coarse = fine.coarsened(4);
  CHECK(coarse.steps() == 16);
  for (int s = 0; s < 16; ++s) {
    Vector sum = Vector::Zero(3);
    for (int j = 0; j < 4; ++j) sum += fine.increment(4 * s + j);
    CHECK((coarse.increment(s) - sum).norm() < 1e-14);
  }
}

TEST_CASE("zero dynamics keep the initial value") {
  SimConfig cfg;
  cfg.dim = cfg.noise_dim = 2;
  cfg.n_paths = 3;
  const Vector v = (Vector(2) << 1.0, -2.0).finished();
  const auto ens = simulate_ensemble(zero_coefficients(2, 2), InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, v)),
                                     cfg);
  for (const auto& p : ens.paths) CHECK((p.value_at_step(p.n_steps()) - v).norm() == 0.0);
}

TEST_CASE("Brownian endpoint variance") {
  SimConfig cfg;
  cfg.n_paths = 4000;
  cfg.seed = 5;
  const auto ens = simulate_ensemble(brownian_coefficients(1, 2.0),
                                     InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Zero(1))), cfg);
  std::vector<double> x;
  for (const auto& p : ens.paths) x.push_back(p.value_at_step(p.n_steps())(0));
  const auto m = mean_se(x);
  double var = 0.0;
  for (double v : x) var += v * v;
  var /= static_cast<double>(x.size());
  CHECK(std::abs(m.mean) < 4 * m.se);
  // Var = 4 T; the SE of the sample variance is about 4 * sqrt(2 / n).
  CHECK(std::abs(var - 4.0) < 4 * 4.0 * std::sqrt(2.0 / 4000));
}

TEST_CASE("neutral fixed point contracts at rate kappa") {
  for (double kappa : {0.0, 0.3, 0.9}) {
    // G depends on the endpoint so the fixed-point iteration is exercised.
    CoefficientSet c = brownian_coefficients(1, 1.0);
    c.G = [kappa](const SegmentView& x) { return Vector(kappa * x.endpoint().array().sin().matrix()); };
    c.neutral_free = false;
    c.declared.kappa = kappa;
    const Segment xi = Segment::constant(1.0 / 64, 0.25, Vector::Constant(1, 0.7));
    StepStats stats;
    euler_step(c, xi.view(), Vector::Constant(1, 0.2), 1.0 / 64, 1e-14, 400, nullptr, &stats);
    CHECK(stats.max_ratio <= kappa + 1e-9);
    CHECK(stats.last_change <= 1e-14 * 2);
  }
}

TEST_CASE("ensembles are identical across thread counts") {
  SimConfig cfg;
  cfg.n_paths = 17;
  cfg.seed = 77;
  LinearExample ex;
  ex.k = 0.4;
  ex.c1 = -1.0;
  ex.c3 = 0.5;
  const auto c = linear_coefficients(ex, cfg.n_tau());
  const auto init = InitialLaw::random(SegmentSampler(cfg.dt, cfg.tau, 1), 3);
  cfg.threads = 1;
  const auto a = simulate_ensemble(c, init, cfg);
  cfg.threads = 4;
  const auto b = simulate_ensemble(c, init, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.paths[i].values() == b.paths[i].values());
  CHECK(a.seeds == b.seeds);
}

TEST_CASE("validation names the field") {
  SimConfig cfg;
  cfg.dt = 0.3;
  try {
    cfg.validate();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK((e.field() == "sim.tau" || e.field() == "sim.T"));
  }
  SimConfig stiff;
  const auto c = with_stiff_drift(brownian_coefficients(1), Vector::Constant(1, -100.0));
  try {
    stiff.validate(std::nullopt, &c);
    FAIL("expected the stiff guard");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "model.A");
  }
}

TEST_CASE("deterministic delay equation converges at first order") {
  const auto c = linear_delay_coefficients(1.0, 0.5, 0.0, false);
  const auto study = strong_convergence(c, [](double) { return Vector::Constant(1, 1.0); }, 0.25, 1.0,
                                        {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128}, 64, 1, 1);
  CHECK(study.observed_order > 0.8);
  CHECK(study.observed_order < 1.2);
}

namespace {

std::string ensemble_digest(const std::string& text) {
  const ExperimentConfig cfg = parse_config(nlohmann::json::parse(text));
  const auto ens = simulate_ensemble(cfg.coeffs, cfg.initial, cfg.sim);
  std::ostringstream os;
  for (const auto& p : ens.paths) write_path(os, p);
  return hex64(fnv1a64(os.str()));
}

}  // namespace

// Golden digests of the written path files, recorded from the first verified run.
TEST_CASE("golden ensembles") {
  CHECK(ensemble_digest(R"({"model": {"preset": "zero", "dim": 2},
      "initial": {"kind": "constant", "value": [1.0, -1.0]},
      "sim": {"T": 0.5, "dt": 0.03125, "tau": 0.125, "n_paths": 4, "seed": 7}})") == GOLDEN_ZERO);
  CHECK(ensemble_digest(R"({"model": {"preset": "brownian", "dim": 1},
      "sim": {"T": 0.5, "dt": 0.03125, "tau": 0.125, "n_paths": 4, "seed": 7}})") == GOLDEN_BROWNIAN);
  CHECK(ensemble_digest(R"({"model": {"preset": "linear", "k": 0.3, "c1": -2.0, "c3": 1.0, "sigma_cap": 1.0},
      "initial": {"kind": "constant", "value": 1.0},
      "sim": {"T": 0.5, "dt": 0.03125, "tau": 0.125, "n_paths": 4, "seed": 7}})") == GOLDEN_LINEAR);
}
