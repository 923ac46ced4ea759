#include "doctest.h"
#include "nfsde/errors.hpp"
#include "nfsde/model.hpp"

using namespace nfsde;

namespace {

CoefficientSet reference_linear(int n_tau) {
  LinearExample ex;
  ex.k = 0.3;
  ex.c1 = -2.0;
  ex.c3 = 1.0;
  ex.sigma_cap = 1.0;
  return linear_coefficients(ex, n_tau);
}

double weighted_sq(const SegmentView& x, const SegmentView& y, const std::vector<double>& w) {
  double s = 0.0;
  for (int j = 0; j < x.points(); ++j) s += w[j] * (x.at(j) - y.at(j)).squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("linear example declares the closed-form constants") {
  const CoefficientSet c = reference_linear(16);
  CHECK(*c.declared.k == 0.3);
  CHECK(*c.declared.kappa == 0.3);
  CHECK(*c.declared.k1 == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(*c.declared.k2 == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(*c.declared.lambda3 == 1.0);
  CHECK(c.declared.delay_weights.size() == 17u);
  CHECK_NOTHROW(c.validate(16));
}

TEST_CASE("declared (k1, k2) hold on every sampled pair") {
  const CoefficientSet c = reference_linear(16);
  const PairSampler pairs(SegmentSampler(1.0 / 64, 0.25, 1), 17);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto [x, y] = pairs.draw(i);
    const double lhs = dissipativity_form(c, x, y);
    const double rhs = -*c.declared.k1 * (x.endpoint() - y.endpoint()).squaredNorm() +
                       *c.declared.k2 * weighted_sq(x, y, c.declared.delay_weights);
    CHECK(lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("Lipschitz estimates of the averaging G stay below k") {
  const CoefficientSet c = reference_linear(16);
  const PairSampler pairs(SegmentSampler(1.0 / 64, 0.25, 1), 5);
  const auto uni = estimate_A1(c, pairs, 2000, LipschitzNorm::uniform);
  const auto l2 = estimate_A1(c, pairs, 2000, LipschitzNorm::rho2);
  CHECK(uni.estimate <= 0.3 + 1e-12);
  CHECK(l2.estimate <= 0.3 + 1e-12);
  CHECK(uni.estimate > 0.2);
  CHECK_FALSE(uni.violates_contraction);
}

TEST_CASE("clipping bounds sigma") {
  LinearExample ex;
  ex.k = 0.5;
  ex.c3 = 3.0;
  ex.sigma_cap = 2.0;
  const CoefficientSet c = linear_coefficients(ex, 8);
  const PairSampler pairs(SegmentSampler(1.0 / 32, 0.25, 1, 3.0), 1);
  const A3Check a3 = check_A3(c, pairs, 1000);
  CHECK(a3.lambda3_hat <= 2.0 + 1e-12);
  CHECK(a3.lambda3_hat > 1.9);
  CHECK(a3.pass);
}

TEST_CASE("k outside (0, 1) is rejected") {
  LinearExample ex;
  ex.k = 1.0;
  CHECK_THROWS_AS(linear_coefficients(ex, 8), DomainError);
  ex.k = 0.0;
  CHECK_THROWS_AS(linear_coefficients(ex, 8), DomainError);
}

TEST_CASE("neutral preset contraction estimate") {
  const CoefficientSet c = delayed_neutral_coefficients(2, 0.6, 1.0);
  const PairSampler pairs(SegmentSampler(1.0 / 16, 0.25, 2), 3);
  const auto est = estimate_A1(c, pairs, 500);
  CHECK(est.estimate <= 0.6 + 1e-12);
}

TEST_CASE("uniform dissipativity fit on the Brownian preset") {
  const CoefficientSet c = brownian_coefficients(1, 1.0);
  const PairSampler pairs(SegmentSampler(1.0 / 16, 0.25, 1), 3);
  const auto est = estimate_A2_B2(c, pairs, 200, DissipativityMode::uniform);
  CHECK(est.lambda1 == 0.0);
  CHECK(est.lambda2 == 0.0);
}

TEST_CASE("stiff drift must be negative") {
  CoefficientSet c = with_stiff_drift(brownian_coefficients(1), Vector::Constant(1, 2.0));
  CHECK_THROWS_AS(c.validate(4), DomainError);
}

TEST_CASE("delay weights are probability measures") {
  for (int n : {1, 4, 33}) {
    double s = 0.0;
    for (double w : uniform_delay_weights(n)) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  }
}
