#pragma once

#include <functional>
#include <string>

#include "nfsde/paths.hpp"

namespace nfsde {

/// Adapted control h(t, X_t) in R^m, clipped to |h| <= h_bound.
struct GirsanovTilt {
  enum class Kind { zero, constant, open_loop, feedback };

  Kind kind = Kind::zero;
  int noise_dim = 1;
  double h_bound = 0.0;
  std::function<Vector(double, const SegmentView&)> h;
  std::string description;

  static GirsanovTilt zero(int noise_dim);
  static GirsanovTilt constant(const Vector& value, double h_bound);
  static GirsanovTilt open_loop(std::function<Vector(double)> fn, int noise_dim, double h_bound);
  /// h(t, xi) = c * tanh(xi(0)) componentwise; requires m == d.
  static GirsanovTilt feedback_tanh(const Vector& c, double h_bound);
  static GirsanovTilt feedback(std::function<Vector(double, const SegmentView&)> fn, int noise_dim, double h_bound);

  /// Evaluates and clips; `clipped` is set when the cap was active.
  Vector evaluate(double t, const SegmentView& x, bool& clipped) const;
  bool is_zero() const noexcept { return kind == Kind::zero; }
};

}  // namespace nfsde
