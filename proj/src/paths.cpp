#include "nfsde/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nfsde/errors.hpp"

namespace nfsde {

int grid_steps(double span, double dt, const char* what) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("grid step dt must be positive and finite");
  if (!(span >= 0.0) || !std::isfinite(span)) throw DomainError(std::string(what) + " must be nonnegative and finite");
  const double ratio = span / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError(std::string(what) + " is not an integer multiple of dt");
  }
  return static_cast<int>(n);
}

namespace {

bool same_dt(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

void require_compatible(const SegmentView& a, const SegmentView& b) {
  if (a.n_tau() != b.n_tau() || a.dim() != b.dim() || !same_dt(a.dt(), b.dt())) {
    throw DomainError("segment grid mismatch");
  }
}

void require_compatible(const SegmentPath& a, const SegmentPath& b) {
  if (!a.same_grid(b)) throw DomainError("path grid mismatch");
}

/// Pointwise Euclidean norms of a - b over all path grid points.
std::vector<double> pointwise_norms(const SegmentPath& a, const SegmentPath& b) {
  std::vector<double> p(static_cast<std::size_t>(a.points()));
  for (int k = 0; k < a.points(); ++k) p[static_cast<std::size_t>(k)] = (a.at(k) - b.at(k)).norm();
  return p;
}

}  // namespace

SegmentView::SegmentView(std::span<const double> data, int n_tau, int dim, double dt)
    : data_(data), n_tau_(n_tau), dim_(dim), dt_(dt) {
  if (n_tau < 1 || dim < 1) throw DomainError("segment needs n_tau >= 1 and dim >= 1");
  if (data.size() != static_cast<std::size_t>(n_tau + 1) * static_cast<std::size_t>(dim)) {
    throw DomainError("segment storage size does not match (n_tau + 1) * dim");
  }
}

Segment::Segment(double dt, int n_tau, int dim, std::vector<double> values)
    : dt_(dt), n_tau_(n_tau), dim_(dim), values_(std::move(values)) {
  if (!(dt > 0.0)) throw DomainError("segment dt must be positive");
  (void)view();  // shape check
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("segment values must be finite");
  }
}

Segment Segment::constant(double dt, double tau, const Vector& value) {
  return from_function(dt, tau, static_cast<int>(value.size()), [&](double) { return value; });
}

SegmentPath::SegmentPath(double dt, int n_tau, int n_steps, int dim, std::vector<double> values)
    : dt_(dt), n_tau_(n_tau), n_steps_(n_steps), dim_(dim), values_(std::move(values)) {
  if (!(dt > 0.0)) throw DomainError("path dt must be positive");
  if (n_tau < 1 || n_steps < 0 || dim < 1) throw DomainError("path needs n_tau >= 1, n_steps >= 0, dim >= 1");
  if (values_.size() != static_cast<std::size_t>(points()) * static_cast<std::size_t>(dim)) {
    throw DomainError("path storage size does not match grid");
  }
}

SegmentPath SegmentPath::with_initial(const Segment& initial, int n_steps) {
  std::vector<double> v(static_cast<std::size_t>(initial.n_tau() + n_steps + 1) * initial.dim(), 0.0);
  std::copy(initial.values().begin(), initial.values().end(), v.begin());
  return SegmentPath(initial.dt(), initial.n_tau(), n_steps, initial.dim(), std::move(v));
}

SegmentView SegmentPath::window(int step) const {
  if (step < 0 || step > n_steps_) throw DomainError("window step outside [0, T]");
  const auto offset = static_cast<std::size_t>(step) * dim_;
  const auto len = static_cast<std::size_t>(n_tau_ + 1) * dim_;
  return SegmentView(std::span<const double>(values_).subspan(offset, len), n_tau_, dim_, dt_);
}

SegmentView SegmentPath::segment_at(double t) const {
  if (!(t >= -1e-12 * std::max(1.0, horizon())) || t > horizon() * (1.0 + 1e-12) + 1e-300) {
    throw DomainError("segment time outside [0, T]");
  }
  const double ratio = t / dt_;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) throw DomainError("segment time is off the grid");
  return window(static_cast<int>(n));
}

bool SegmentPath::same_grid(const SegmentPath& o) const noexcept {
  return n_tau_ == o.n_tau_ && n_steps_ == o.n_steps_ && dim_ == o.dim_ && same_dt(dt_, o.dt_);
}

Segment to_segment(const SegmentView& v) {
  return Segment(v.dt(), v.n_tau(), v.dim(), std::vector<double>(v.raw().begin(), v.raw().end()));
}

Segment segment_at(const SegmentPath& path, double t) { return to_segment(path.segment_at(t)); }

void PathEnsemble::validate() const {
  if (paths.empty()) throw DomainError("ensemble is empty");
  if (seeds.size() != paths.size()) throw DomainError("ensemble needs one seed per path");
  if (weights.size() != paths.size()) throw DomainError("ensemble needs one weight per path");
  for (const auto& p : paths) {
    if (!p.same_grid(paths.front())) throw DomainError("ensemble paths do not share a grid");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("ensemble weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("ensemble weights must sum to 1");
}

PathEnsemble PathEnsemble::uniform(std::vector<SegmentPath> paths, std::vector<std::uint64_t> seeds) {
  PathEnsemble e;
  const auto n = paths.size();
  e.paths = std::move(paths);
  e.seeds = std::move(seeds);
  e.weights.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  return e;
}

// ---------------------------------------------------------------------------

double rho_uniform(const SegmentView& a, const SegmentView& b) {
  require_compatible(a, b);
  double m = 0.0;
  for (int j = 0; j < a.points(); ++j) m = std::max(m, (a.at(j) - b.at(j)).norm());
  return m;
}

double rho_inf_path(const SegmentPath& a, const SegmentPath& b) {
  require_compatible(a, b);
  double m = 0.0;
  for (int k = 0; k < a.points(); ++k) m = std::max(m, (a.at(k) - b.at(k)).norm());
  return m;
}

double rho_inf_weighted(const SegmentPath& a, const SegmentPath& b, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("weighted uniform metric needs lambda >= 0");
  require_compatible(a, b);
  const auto p = pointwise_norms(a, b);
  const int n = a.n_tau();
  // Sliding-window maximum over [i, i + n_tau].
  std::deque<int> q;
  double best = 0.0;
  for (int k = 0; k < a.points(); ++k) {
    while (!q.empty() && p[static_cast<std::size_t>(q.back())] <= p[static_cast<std::size_t>(k)]) q.pop_back();
    q.push_back(k);
    const int i = k - n;  // window start
    if (i < 0) continue;
    while (q.front() < i) q.pop_front();
    const double w = std::exp(-lambda * i * a.dt()) * p[static_cast<std::size_t>(q.front())];
    best = std::max(best, w);
  }
  return best;
}

double rho_2(const SegmentView& a, const SegmentView& b) {
  require_compatible(a, b);
  const int n = a.n_tau();
  double s = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double w = (j == 0 || j == n) ? 0.5 : 1.0;
    s += w * (a.at(j) - b.at(j)).squaredNorm();
  }
  return std::sqrt(s / n);
}

double rho_2_tilde(const SegmentView& a, const SegmentView& b) {
  const double r = rho_2(a, b);
  return std::sqrt((a.endpoint() - b.endpoint()).squaredNorm() + r * r);
}

double rho_2_lambda_path(const SegmentPath& a, const SegmentPath& b, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("weighted L2 metric needs lambda >= 0");
  require_compatible(a, b);
  const int n = a.n_tau();
  const int steps = a.n_steps();
  if (steps == 0) return 0.0;
  std::vector<double> sq(static_cast<std::size_t>(a.points()));
  for (int k = 0; k < a.points(); ++k) sq[static_cast<std::size_t>(k)] = (a.at(k) - b.at(k)).squaredNorm();
  std::vector<double> prefix(sq.size() + 1, 0.0);
  std::partial_sum(sq.begin(), sq.end(), prefix.begin() + 1);
  double total = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(i + n);
    double window = prefix[hi + 1] - prefix[lo] - 0.5 * (sq[lo] + sq[hi]);
    window = std::max(window, 0.0) / n;  // rho_2(window)^2
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    total += w * std::exp(-lambda * i * a.dt()) * window;
  }
  return std::sqrt(total * a.dt());
}

double PathMetric::operator()(const SegmentPath& a, const SegmentPath& b) const {
  switch (kind) {
    case Kind::uniform_sup:
      return rho_inf_path(a, b);
    case Kind::weighted_sup:
      return rho_inf_weighted(a, b, lambda);
    case Kind::l2_weighted:
      return rho_2_lambda_path(a, b, lambda);
  }
  throw DomainError("unknown path metric");
}

std::string PathMetric::tag() const {
  char buf[64];
  switch (kind) {
    case Kind::uniform_sup:
      return "rho_inf";
    case Kind::weighted_sup:
      std::snprintf(buf, sizeof buf, "rho_inf_weighted(lambda=%.17g)", lambda);
      return buf;
    case Kind::l2_weighted:
      std::snprintf(buf, sizeof buf, "rho_2_lambda(lambda=%.17g)", lambda);
      return buf;
  }
  return "unknown";
}

double segment_distance(SegmentMetric metric, const SegmentView& a, const SegmentView& b) {
  switch (metric) {
    case SegmentMetric::uniform:
      return rho_uniform(a, b);
    case SegmentMetric::l2:
      return rho_2(a, b);
    case SegmentMetric::l2_tilde:
      return rho_2_tilde(a, b);
  }
  throw DomainError("unknown segment metric");
}

// ---------------------------------------------------------------------------

void write_path(std::ostream& os, const SegmentPath& path) {
  char buf[64];
  os << "# dt=";
  std::snprintf(buf, sizeof buf, "%.17g", path.dt());
  os << buf << " tau=";
  std::snprintf(buf, sizeof buf, "%.17g", path.tau());
  os << buf << " T=";
  std::snprintf(buf, sizeof buf, "%.17g", path.horizon());
  os << buf << " d=" << path.dim() << '\n';
  for (int k = 0; k < path.points(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", path.time(k));
    os << buf;
    const auto x = path.at(k);
    for (int c = 0; c < path.dim(); ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", x(c));
      os << buf;
    }
    os << '\n';
  }
}

SegmentPath read_path(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw DomainError("path file: missing header");
  double dt = 0, tau = 0, T = 0;
  int d = 0;
  if (std::sscanf(header.c_str(), "# dt=%lf tau=%lf T=%lf d=%d", &dt, &tau, &T, &d) != 4 || d < 1) {
    throw DomainError("path file: malformed header");
  }
  const int n_tau = grid_steps(tau, dt, "tau");
  const int n_steps = grid_steps(T, dt, "T");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_tau + n_steps + 1) * d);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double t = 0;
    row >> t;
    for (int c = 0; c < d; ++c) {
      double x = 0;
      if (!(row >> x)) throw DomainError("path file: short row");
      values.push_back(x);
    }
    ++rows;
  }
  if (rows != n_tau + n_steps + 1) throw DomainError("path file: row count does not match header");
  return SegmentPath(dt, n_tau, n_steps, d, std::move(values));
}

}  // namespace nfsde
