#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nfsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstPoint = Eigen::Map<const Eigen::VectorXd>;

/// Number of grid steps of size `dt` covering `span`. Throws DomainError when
/// `span` is not an integer multiple of `dt` (relative tolerance 1e-9).
int grid_steps(double span, double dt, const char* what);

/// Non-owning view of a segment: n_tau + 1 points in R^dim at the times
/// -tau, -tau + dt, ..., 0, stored point-major.
class SegmentView {
 public:
  SegmentView(std::span<const double> data, int n_tau, int dim, double dt);

  int n_tau() const noexcept { return n_tau_; }
  int points() const noexcept { return n_tau_ + 1; }
  int dim() const noexcept { return dim_; }
  double dt() const noexcept { return dt_; }
  double tau() const noexcept { return n_tau_ * dt_; }

  /// Value at theta_j = -tau + j * dt.
  ConstPoint at(int j) const { return ConstPoint(data_.data() + static_cast<std::ptrdiff_t>(j) * dim_, dim_); }
  ConstPoint endpoint() const { return at(n_tau_); }
  ConstPoint start() const { return at(0); }
  std::span<const double> raw() const noexcept { return data_; }

 private:
  std::span<const double> data_;
  int n_tau_;
  int dim_;
  double dt_;
};

/// A discretized function on [-tau, 0] with values in R^d.
class Segment {
 public:
  Segment(double dt, int n_tau, int dim, std::vector<double> values);

  static Segment constant(double dt, double tau, const Vector& value);
  /// Samples f(theta) at the grid points.
  template <class F>
  static Segment from_function(double dt, double tau, int dim, F&& f) {
    const int n = grid_steps(tau, dt, "tau");
    std::vector<double> v(static_cast<std::size_t>(n + 1) * dim);
    for (int j = 0; j <= n; ++j) {
      const Vector x = f(-tau + j * dt);
      for (int c = 0; c < dim; ++c) v[static_cast<std::size_t>(j) * dim + c] = x(c);
    }
    return Segment(dt, n, dim, std::move(v));
  }

  SegmentView view() const { return SegmentView(values_, n_tau_, dim_, dt_); }
  operator SegmentView() const { return view(); }

  int n_tau() const noexcept { return n_tau_; }
  int dim() const noexcept { return dim_; }
  double dt() const noexcept { return dt_; }
  double tau() const noexcept { return n_tau_ * dt_; }
  int points() const noexcept { return n_tau_ + 1; }
  ConstPoint at(int j) const { return view().at(j); }
  ConstPoint endpoint() const { return at(n_tau_); }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  double dt_;
  int n_tau_;
  int dim_;
  std::vector<double> values_;
};

/// One trajectory on [-tau, T] on a uniform grid; the first n_tau + 1 points
/// are the initial segment.
class SegmentPath {
 public:
  SegmentPath(double dt, int n_tau, int n_steps, int dim, std::vector<double> values);
  /// Path whose initial segment is `initial` and whose remaining values are zero.
  static SegmentPath with_initial(const Segment& initial, int n_steps);

  int n_tau() const noexcept { return n_tau_; }
  int n_steps() const noexcept { return n_steps_; }
  int points() const noexcept { return n_tau_ + n_steps_ + 1; }
  int dim() const noexcept { return dim_; }
  double dt() const noexcept { return dt_; }
  double tau() const noexcept { return n_tau_ * dt_; }
  double horizon() const noexcept { return n_steps_ * dt_; }
  /// Time of grid index k (k = 0 is -tau).
  double time(int k) const noexcept { return (k - n_tau_) * dt_; }

  ConstPoint at(int k) const { return ConstPoint(values_.data() + static_cast<std::ptrdiff_t>(k) * dim_, dim_); }
  /// Value X(t_i) for the i-th step time t_i = i * dt, i in [0, n_steps].
  ConstPoint value_at_step(int i) const { return at(i + n_tau_); }
  std::span<double> mutable_point(int k) {
    return {values_.data() + static_cast<std::ptrdiff_t>(k) * dim_, static_cast<std::size_t>(dim_)};
  }

  /// Window X_{t_i} for step index i in [0, n_steps].
  SegmentView window(int step) const;
  SegmentView initial_segment() const { return window(0); }
  /// Window at continuous time t; t must lie on the grid in [0, T].
  SegmentView segment_at(double t) const;

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }

  bool same_grid(const SegmentPath& other) const noexcept;

 private:
  double dt_;
  int n_tau_;
  int n_steps_;
  int dim_;
  std::vector<double> values_;
};

/// Copies a window into an owning Segment.
Segment to_segment(const SegmentView& v);

/// Window of `path` over [t - tau, t], re-indexed to [-tau, 0].
Segment segment_at(const SegmentPath& path, double t);

struct PathEnsemble {
  std::vector<SegmentPath> paths;
  std::vector<std::uint64_t> seeds;
  std::vector<double> weights;

  std::size_t size() const noexcept { return paths.size(); }
  /// Checks shared grid, seed count and weight normalization; throws DomainError.
  void validate() const;
  static PathEnsemble uniform(std::vector<SegmentPath> paths, std::vector<std::uint64_t> seeds);
};

// ---------------------------------------------------------------------------
// Distances. Every function throws DomainError on grid or dimension mismatch.

/// max_j |a(theta_j) - b(theta_j)|.
double rho_uniform(const SegmentView& a, const SegmentView& b);
/// sup over t in [0, T] of rho_uniform of the windows at t.
double rho_inf_path(const SegmentPath& a, const SegmentPath& b);
/// sup over t of exp(-lambda t) * rho_uniform of the windows at t.
double rho_inf_weighted(const SegmentPath& a, const SegmentPath& b, double lambda);
/// sqrt((1/tau) * trapezoid integral of |a - b|^2 over [-tau, 0]).
double rho_2(const SegmentView& a, const SegmentView& b);
/// sqrt(|a(0) - b(0)|^2 + rho_2(a, b)^2).
double rho_2_tilde(const SegmentView& a, const SegmentView& b);
/// sqrt(trapezoid integral over [0, T] of exp(-lambda t) rho_2(windows)^2).
double rho_2_lambda_path(const SegmentPath& a, const SegmentPath& b, double lambda);

/// Path-space metric selector used by cost matrices and reports.
struct PathMetric {
  enum class Kind { uniform_sup, weighted_sup, l2_weighted };
  Kind kind = Kind::uniform_sup;
  double lambda = 0.0;

  static PathMetric uniform() { return {Kind::uniform_sup, 0.0}; }
  static PathMetric weighted(double lambda) { return {Kind::weighted_sup, lambda}; }
  static PathMetric l2(double lambda) { return {Kind::l2_weighted, lambda}; }

  double operator()(const SegmentPath& a, const SegmentPath& b) const;
  std::string tag() const;
};

/// Segment-space metric selector (initial-law distances).
enum class SegmentMetric { uniform, l2, l2_tilde };
double segment_distance(SegmentMetric metric, const SegmentView& a, const SegmentView& b);

// ---------------------------------------------------------------------------
// Columnar text format:
//   # dt=<v> tau=<v> T=<v> d=<v>
//   <time> <x_1> ... <x_d>        (one row per grid time, 17 significant digits)

void write_path(std::ostream& os, const SegmentPath& path);
SegmentPath read_path(std::istream& is);

}  // namespace nfsde
