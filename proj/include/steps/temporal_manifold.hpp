#pragma once

#include <memory>
#include <vector>

#include "steps/types.hpp"

namespace steps {

/// Path graph over horizon steps 1..H with one edge per consecutive pair.
class TemporalChain {
 public:
  /// Unit-weight chain.
  explicit TemporalChain(int horizon);
  /// Weighted chain; `edge_weights` must hold H-1 nonnegative values.
  TemporalChain(int horizon, std::vector<double> edge_weights);

  int horizon() const noexcept { return horizon_; }
  const std::vector<double>& edge_weights() const noexcept { return weights_; }

  /// Weighted graph Laplacian (H x H).
  Matrix laplacian() const;

 private:
  int horizon_;
  std::vector<double> weights_;
};

/// First-order difference matrix D, (H-1) x H, row i = e_{i+1} - e_i.
Matrix difference_matrix(int horizon);

/// Regularized smoothing operator P = (D^T D + alpha I)^{-1}.
///
/// Immutable once built. The full inverse is materialized because the local
/// solver consumes its leading columns.
class TransferOperator {
 public:
  TransferOperator(int horizon, double alpha);

  int horizon() const noexcept { return static_cast<int>(p_.rows()); }
  double alpha() const noexcept { return alpha_; }
  const Matrix& matrix() const noexcept { return p_; }

  /// Columns 0..count-1 of P (count <= H).
  auto leading_columns(int count) const { return p_.leftCols(count); }

 private:
  double alpha_;
  Matrix p_;
};

/// Cached operator lookup keyed by (H, alpha rounded to 12 decimals).
/// Thread-safe; returned operators are shared and immutable.
std::shared_ptr<const TransferOperator> build_transfer_operator(int horizon, double alpha);

/// Number of operators currently held by the cache.
std::size_t transfer_operator_cache_size();

/// (1/2) sum_h w_h ||field_{h+1} - field_h||^2.
double dirichlet_energy(const Matrix& field, const TemporalChain& chain);

/// Exact Dirichlet-energy minimizer with the first `boundary.rows()` nodes
/// clamped to `boundary`. Solves L_UU R_U = -L_UB R_B. When the boundary
/// covers the whole chain its first H rows are returned unchanged.
Matrix harmonic_extension(const Matrix& boundary, const TemporalChain& chain);

}  // namespace steps
