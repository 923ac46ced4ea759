#include "nfsde/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfsde/errors.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/parallel.hpp"

namespace nfsde {

CostMatrix CostMatrix::select(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
  if (rows.size() != cols.size()) throw DomainError("selection must be square");
  CostMatrix out;
  out.n = rows.size();
  out.metric = metric;
  out.cost.resize(out.n * out.n);
  for (std::size_t i = 0; i < out.n; ++i) {
    const double* src = cost.data() + rows[i] * n;
    for (std::size_t j = 0; j < out.n; ++j) out.cost[i * out.n + j] = src[cols[j]];
  }
  return out;
}

CostMatrix CostMatrix::transposed() const {
  CostMatrix out = *this;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.cost[j * n + i] = cost[i * n + j];
  return out;
}

double CostMatrix::median() const {
  if (cost.empty()) throw DomainError("median of an empty cost matrix");
  std::vector<double> v = cost;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

CostMatrix cost_matrix(const PathEnsemble& a, const PathEnsemble& b, const PathMetric& metric, int threads) {
  if (a.size() != b.size() || a.size() == 0) throw DomainError("cost matrix needs two nonempty ensembles of equal size");
  if (!a.paths.front().same_grid(b.paths.front())) throw DomainError("ensembles are on different grids");
  CostMatrix c;
  c.n = a.size();
  c.metric = metric.tag();
  c.cost.resize(c.n * c.n);
  parallel_for(c.n, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < c.n; ++j) {
      const double d = metric(a.paths[i], b.paths[j]);
      c.cost[i * c.n + j] = d * d;
    }
  });
  return c;
}

CostMatrix segment_cost_matrix(const std::vector<Segment>& a, const std::vector<Segment>& b, SegmentMetric metric,
                               int threads) {
  if (a.size() != b.size() || a.empty()) throw DomainError("cost matrix needs two nonempty samples of equal size");
  CostMatrix c;
  c.n = a.size();
  c.metric = metric == SegmentMetric::uniform ? "rho_inf" : (metric == SegmentMetric::l2 ? "rho_2" : "rho_2_tilde");
  c.cost.resize(c.n * c.n);
  parallel_for(c.n, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < c.n; ++j) {
      const double d = segment_distance(metric, a[i], b[j]);
      c.cost[i * c.n + j] = d * d;
    }
  });
  return c;
}

Assignment solve_assignment(const CostMatrix& c) {
  const std::size_t n = c.n;
  if (n == 0) return {};
  for (double x : c.cost) {
    if (!std::isfinite(x)) throw DomainError("cost matrix has non-finite entries");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 of `match` is the virtual root column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* crow = c.cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = crow[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.column_of_row[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) a.total_cost += c(i, a.column_of_row[i]);
  return a;
}

double exact_w2(const CostMatrix& c, std::size_t cap) {
  if (c.n == 0) throw DomainError("empty cost matrix");
  if (c.n > cap) {
    throw SizeError("exact_w2 supports at most " + std::to_string(cap) + " samples; use sinkhorn_w2");
  }
  const Assignment a = solve_assignment(c);
  return std::sqrt(std::max(0.0, a.total_cost / static_cast<double>(c.n)));
}

double relative_epsilon(const CostMatrix& c, double relative) {
  if (!(relative > 0.0)) throw DomainError("relative epsilon must be positive");
  const double med = c.median();
  if (!(med > 0.0)) throw DomainError("median cost is zero; give an absolute epsilon");
  return relative * med;
}

namespace {

struct EntropicValue {
  double value = 0.0;
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

double log_sum_exp(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

// Dual value <a, f> + <b, g> of entropic OT between uniform weights. With
// `symmetric` the cost is a self-cost (a = b) and the averaged update
// f <- (f + T(f)) / 2 is used, which converges much faster than alternating.
EntropicValue entropic_ot(const CostMatrix& c, const SinkhornOptions& opt, bool symmetric) {
  const std::size_t n = c.n;
  const double log_w = -std::log(static_cast<double>(n));
  std::vector<double> f(n, 0.0), g(n, 0.0), buf(n);
  const CostMatrix ct = symmetric ? CostMatrix{} : c.transposed();

  double max_cost = 0.0;
  for (double x : c.cost) max_cost = std::max(max_cost, x);
  double eps = opt.epsilon_scaling ? std::max(opt.epsilon, max_cost) : opt.epsilon;

  auto update = [&](const CostMatrix& m, const std::vector<double>& other, std::vector<double>& out, double e) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = m.cost.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) buf[j] = log_w + (other[j] - row[j]) / e;
      out[i] = -e * log_sum_exp(buf.data(), n);
    }
  };
  // L1 distance of the row marginal of the current plan from uniform.
  auto row_violation = [&](double e) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = c.cost.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) buf[j] = 2.0 * log_w + (f[i] + g[j] - row[j]) / e;
      total += std::abs(std::exp(log_sum_exp(buf.data(), n)) - std::exp(log_w));
    }
    return total;
  };
  std::vector<double> next(n);
  auto iterate = [&](double e) {
    if (symmetric) {
      update(c, f, next, e);
      for (std::size_t i = 0; i < n; ++i) f[i] = 0.5 * (f[i] + next[i]);
      g = f;
    } else {
      update(c, g, f, e);
      update(ct, f, g, e);
    }
  };

  EntropicValue out;
  int used = 0;
  for (;;) {
    const bool final_stage = eps <= opt.epsilon;
    const int stage_cap = final_stage ? opt.max_iter - used : std::min(opt.max_iter - used, 100);
    for (int it = 0; it < stage_cap; ++it) {
      iterate(eps);
      ++used;
      if (final_stage && (it % 10 == 9 || it == stage_cap - 1)) {
        out.residual = row_violation(eps);
        if (out.residual < opt.tol) {
          out.converged = true;
          break;
        }
      }
    }
    if (final_stage || used >= opt.max_iter) break;
    eps = std::max(opt.epsilon, 0.5 * eps);
  }
  if (!out.converged) out.residual = row_violation(opt.epsilon);
  out.iterations = used;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f[i] + g[i];
  out.value = acc / static_cast<double>(n);
  return out;
}

}  // namespace

SinkhornResult sinkhorn_w2(const CostMatrix& c, const SinkhornOptions& opt, const CostMatrix* self_a,
                           const CostMatrix* self_b) {
  if (!(opt.epsilon > 0.0)) throw DomainError("sinkhorn needs epsilon > 0");
  if (c.n == 0) throw DomainError("empty cost matrix");
  if ((self_a == nullptr) != (self_b == nullptr)) throw DomainError("debiasing needs both self-cost matrices");
  const EntropicValue ab = entropic_ot(c, opt, false);
  SinkhornResult r;
  r.value = ab.value;
  r.estimate = std::sqrt(std::max(0.0, ab.value));
  r.converged = ab.converged;
  r.residual = ab.residual;
  r.iterations = ab.iterations;
  r.debiased = r.estimate;
  if (self_a) {
    if (self_a->n != c.n || self_b->n != c.n) throw DomainError("self-cost matrices must match in size");
    const EntropicValue aa = entropic_ot(*self_a, opt, true);
    const EntropicValue bb = entropic_ot(*self_b, opt, true);
    r.debiased = std::sqrt(std::max(0.0, ab.value - 0.5 * (aa.value + bb.value)));
    r.converged = r.converged && aa.converged && bb.converged;
    r.residual = std::max({r.residual, aa.residual, bb.residual});
  }
  return r;
}

double coupling_upper_bound(const PathEnsemble& a, const PathEnsemble& b, const PathMetric& metric) {
  if (a.size() != b.size() || a.size() == 0) throw DomainError("coupled ensembles must have equal nonzero size");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = metric(a.paths[i], b.paths[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double coupling_upper_bound(const CouplingResult& result, const PathMetric& metric) {
  return coupling_upper_bound(result.x_paths, result.y_paths, metric);
}

}  // namespace nfsde
