#include <cmath>

#include "doctest.h"
#include "nfsde/errors.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/ot.hpp"
#include "nfsde/rng.hpp"
#include "nfsde/tci.hpp"
#include "oracles.hpp"

using namespace nfsde;

namespace {

CostMatrix random_cost(std::size_t n, std::uint64_t seed, bool integer) {
  CounterRng rng(seed, 0);
  CostMatrix c;
  c.n = n;
  for (std::size_t i = 0; i < n * n; ++i) {
    c.cost.push_back(integer ? static_cast<double>(rng.below(4)) : rng.uniform() * 10.0);
  }
  return c;
}

}  // namespace

TEST_CASE("assignment matches factorial enumeration") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t n = 1 + s % 6;
    // Every third instance has many ties.
    const CostMatrix c = random_cost(n, s, s % 3 == 0);
    CHECK(exact_w2(c) == doctest::Approx(oracle::brute_w2(c.cost, n)).epsilon(1e-9));
    const Assignment a = solve_assignment(c);
    std::vector<bool> used(n, false);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK_FALSE(used[a.column_of_row[i]]);
      used[a.column_of_row[i]] = true;
      total += c(i, a.column_of_row[i]);
    }
    CHECK(total == doctest::Approx(a.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("ties resolve to the identity") {
  CostMatrix c;
  c.n = 5;
  c.cost.assign(25, 1.0);
  const Assignment a = solve_assignment(c);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.column_of_row[i] == i);
}

TEST_CASE("exact solver refuses oversized problems") {
  CostMatrix c;
  c.n = kExactW2Cap + 1;
  c.cost.assign(c.n * c.n, 0.0);
  CHECK_THROWS_AS(exact_w2(c), SizeError);
}

TEST_CASE("debiased Sinkhorn tracks the exact value") {
  std::vector<SegmentPath> a, b;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 64; ++i) {
    a.push_back(random_walk_path(i, 1.0 / 16, 0.25, 0.5, 1));
    b.push_back(random_walk_path(1000 + i, 1.0 / 16, 0.25, 0.5, 1, 1.5));
    seeds.push_back(i);
  }
  const auto ea = PathEnsemble::uniform(a, seeds), eb = PathEnsemble::uniform(b, seeds);
  const auto m = PathMetric::uniform();
  const CostMatrix ab = cost_matrix(ea, eb, m), aa = cost_matrix(ea, ea, m), bb = cost_matrix(eb, eb, m);
  const double exact = exact_w2(ab);
  SinkhornOptions opt;
  opt.epsilon = relative_epsilon(ab, 0.01);
  const auto s = sinkhorn_w2(ab, opt, &aa, &bb);
  INFO("residual ", s.residual, " iterations ", s.iterations, " debiased ", s.debiased, " exact ", exact);
  // Small epsilon converges slowly; the marginal error still has to be tiny.
  CHECK(s.residual < 1e-4);
  CHECK(std::abs(s.debiased - exact) <= 0.05 * exact);
  CHECK(s.estimate >= exact - 1e-9);
}

TEST_CASE("synchronous coupling dominates W2") {
  SimConfig cfg;
  cfg.n_paths = 64;
  cfg.seed = 4;
  LinearExample ex;
  ex.k = 0.3;
  ex.c1 = -2.0;
  ex.c3 = 1.0;
  ex.sigma_cap = 1.0;
  const auto c = linear_coefficients(ex, cfg.n_tau());
  const auto init = InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Constant(1, 1.0)));
  const auto r = coupled_simulate(c, init, cfg, GirsanovTilt::constant(Vector::Constant(1, 0.5), 0.5));
  for (const PathMetric m : {PathMetric::uniform(), PathMetric::l2(0.0), PathMetric::weighted(1.0)}) {
    CHECK(exact_w2(cost_matrix(r.x_paths, r.y_paths, m)) <= coupling_upper_bound(r, m) + 1e-9);
  }
}
