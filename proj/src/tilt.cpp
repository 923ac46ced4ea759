#include "nfsde/tilt.hpp"

#include <cmath>
#include <utility>

#include "nfsde/errors.hpp"

namespace nfsde {

namespace {

void check_bound(double h_bound) {
  if (!(h_bound >= 0.0) || !std::isfinite(h_bound)) throw DomainError("tilt bound must be finite and nonnegative");
}

}  // namespace

GirsanovTilt GirsanovTilt::zero(int noise_dim) {
  GirsanovTilt t;
  t.kind = Kind::zero;
  t.noise_dim = noise_dim;
  t.h_bound = 0.0;
  t.h = [noise_dim](double, const SegmentView&) -> Vector { return Vector::Zero(noise_dim); };
  t.description = "zero";
  return t;
}

GirsanovTilt GirsanovTilt::constant(const Vector& value, double h_bound) {
  check_bound(h_bound);
  if (value.size() < 1) throw DomainError("constant tilt needs a value");
  GirsanovTilt t;
  t.kind = value.isZero(0.0) ? Kind::zero : Kind::constant;
  t.noise_dim = static_cast<int>(value.size());
  t.h_bound = h_bound;
  t.h = [value](double, const SegmentView&) -> Vector { return value; };
  t.description = "constant";
  return t;
}

GirsanovTilt GirsanovTilt::open_loop(std::function<Vector(double)> fn, int noise_dim, double h_bound) {
  check_bound(h_bound);
  GirsanovTilt t;
  t.kind = Kind::open_loop;
  t.noise_dim = noise_dim;
  t.h_bound = h_bound;
  t.h = [fn = std::move(fn)](double s, const SegmentView&) -> Vector { return fn(s); };
  t.description = "open_loop";
  return t;
}

GirsanovTilt GirsanovTilt::feedback_tanh(const Vector& c, double h_bound) {
  check_bound(h_bound);
  GirsanovTilt t;
  t.kind = Kind::feedback;
  t.noise_dim = static_cast<int>(c.size());
  t.h_bound = h_bound;
  t.h = [c](double, const SegmentView& x) -> Vector {
    if (x.dim() != c.size()) throw DomainError("tanh feedback tilt requires noise_dim == dim");
    return c.cwiseProduct(x.endpoint().array().tanh().matrix());
  };
  t.description = "feedback_tanh";
  return t;
}

GirsanovTilt GirsanovTilt::feedback(std::function<Vector(double, const SegmentView&)> fn, int noise_dim,
                                    double h_bound) {
  check_bound(h_bound);
  GirsanovTilt t;
  t.kind = Kind::feedback;
  t.noise_dim = noise_dim;
  t.h_bound = h_bound;
  t.h = std::move(fn);
  t.description = "feedback";
  return t;
}

Vector GirsanovTilt::evaluate(double t, const SegmentView& x, bool& clipped) const {
  clipped = false;
  Vector v = h(t, x);
  if (v.size() != noise_dim) throw DomainError("tilt returned a vector of the wrong size");
  if (!v.allFinite()) throw NumericError("tilt returned a non-finite value");
  const double n = v.norm();
  if (n > h_bound) {
    v *= h_bound / n;
    clipped = true;
  }
  return v;
}

}  // namespace nfsde
