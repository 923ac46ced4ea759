#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nfsde/paths.hpp"

namespace nfsde {

struct CouplingResult;

/// Dense n x n matrix of squared distances, row-major.
struct CostMatrix {
  std::size_t n = 0;
  std::vector<double> cost;
  std::string metric;

  double operator()(std::size_t i, std::size_t j) const { return cost[i * n + j]; }
  /// Rows `rows` and columns `cols` of this matrix (indices may repeat).
  CostMatrix select(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const;
  CostMatrix transposed() const;
  double median() const;
};

/// Entry (i, j) = metric(a_i, b_j)^2. Throws DomainError on size or grid mismatch.
CostMatrix cost_matrix(const PathEnsemble& a, const PathEnsemble& b, const PathMetric& metric, int threads = 1);
/// Same for initial-law samples under a segment metric.
CostMatrix segment_cost_matrix(const std::vector<Segment>& a, const std::vector<Segment>& b, SegmentMetric metric,
                               int threads = 1);

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching by successive shortest augmenting paths
/// with dual potentials, O(n^3). Deterministic: ties go to the lowest column index.
Assignment solve_assignment(const CostMatrix& c);

inline constexpr std::size_t kExactW2Cap = 1024;

/// sqrt(min over permutations of the mean assigned cost). Throws SizeError
/// above `cap`; use sinkhorn_w2 for larger ensembles.
double exact_w2(const CostMatrix& c, std::size_t cap = kExactW2Cap);

struct SinkhornOptions {
  double epsilon = 0.0;  // absolute regularization; must be positive
  int max_iter = 20000;
  double tol = 1e-6;  // L1 violation of the row marginal
  /// Start from a large epsilon and halve it down to the target, reusing potentials.
  bool epsilon_scaling = true;
};

struct SinkhornResult {
  double estimate = 0.0;  // sqrt of the entropic transport value
  double debiased = 0.0;  // sqrt of OT_eps(a,b) - (OT_eps(a,a) + OT_eps(b,b)) / 2, clamped at 0
  double value = 0.0;     // OT_eps(a, b), squared units
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

/// Entropic OT between two uniform clouds in the log domain. Debiasing needs
/// the self-cost matrices; without them `debiased` equals `estimate`.
SinkhornResult sinkhorn_w2(const CostMatrix& c, const SinkhornOptions& opt, const CostMatrix* self_a = nullptr,
                           const CostMatrix* self_b = nullptr);

/// epsilon = relative * median(cost).
double relative_epsilon(const CostMatrix& c, double relative);

/// sqrt(mean over coupled pairs of metric(X_i, Y_i)^2): the cost of the
/// synchronous coupling, an upper bound for W_2 between the two laws.
double coupling_upper_bound(const CouplingResult& result, const PathMetric& metric);
double coupling_upper_bound(const PathEnsemble& a, const PathEnsemble& b, const PathMetric& metric);

}  // namespace nfsde
