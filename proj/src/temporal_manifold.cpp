#include "steps/temporal_manifold.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "steps/errors.hpp"

namespace steps {

namespace {

void check_horizon(int horizon) {
  require(horizon >= 2, ErrorKind::kInvalidArgument,
          "invalid horizon " + std::to_string(horizon) + ": the temporal chain needs H >= 2");
}

}  // namespace

TemporalChain::TemporalChain(int horizon)
    : TemporalChain(horizon, std::vector<double>(horizon >= 2 ? horizon - 1 : 0, 1.0)) {}

TemporalChain::TemporalChain(int horizon, std::vector<double> edge_weights)
    : horizon_(horizon), weights_(std::move(edge_weights)) {
  check_horizon(horizon);
  require(static_cast<int>(weights_.size()) == horizon - 1, ErrorKind::kDimension,
          "temporal chain expects H-1 edge weights");
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, ErrorKind::kInvalidArgument,
            "edge weights must be finite and nonnegative");
  }
}

Matrix TemporalChain::laplacian() const {
  Matrix lap = Matrix::Zero(horizon_, horizon_);
  for (int h = 0; h + 1 < horizon_; ++h) {
    const double w = weights_[h];
    lap(h, h) += w;
    lap(h + 1, h + 1) += w;
    lap(h, h + 1) -= w;
    lap(h + 1, h) -= w;
  }
  return lap;
}

Matrix difference_matrix(int horizon) {
  check_horizon(horizon);
  Matrix d = Matrix::Zero(horizon - 1, horizon);
  for (int i = 0; i + 1 < horizon; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

TransferOperator::TransferOperator(int horizon, double alpha) : alpha_(alpha) {
  check_horizon(horizon);
  require(std::isfinite(alpha) && alpha > 0.0, ErrorKind::kInvalidArgument,
          "invalid regularizer alpha=" + std::to_string(alpha) + " (must be > 0)");
  Matrix system = TemporalChain(horizon).laplacian();
  system.diagonal().array() += alpha;
  Eigen::LLT<Matrix> llt(system);
  require(llt.info() == Eigen::Success, ErrorKind::kNumerical,
          "transfer operator system is not positive definite");
  p_ = llt.solve(Matrix::Identity(horizon, horizon));
  // The solve is symmetric only up to rounding.
  p_ = 0.5 * (p_ + p_.transpose()).eval();
}

namespace {

struct OperatorCache {
  std::mutex mutex;
  std::map<std::pair<int, double>, std::shared_ptr<const TransferOperator>> entries;
};

OperatorCache& operator_cache() {
  static OperatorCache cache;
  return cache;
}

}  // namespace

std::shared_ptr<const TransferOperator> build_transfer_operator(int horizon, double alpha) {
  check_horizon(horizon);
  require(std::isfinite(alpha) && alpha > 0.0, ErrorKind::kInvalidArgument,
          "invalid regularizer alpha=" + std::to_string(alpha) + " (must be > 0)");
  const auto key = std::make_pair(horizon, std::round(alpha * 1e12) / 1e12);
  auto& cache = operator_cache();
  {
    std::lock_guard lock(cache.mutex);
    if (auto it = cache.entries.find(key); it != cache.entries.end()) return it->second;
  }
  // Built outside the lock; a racing insertion keeps the first one.
  auto op = std::make_shared<const TransferOperator>(horizon, alpha);
  std::lock_guard lock(cache.mutex);
  return cache.entries.emplace(key, std::move(op)).first->second;
}

std::size_t transfer_operator_cache_size() {
  auto& cache = operator_cache();
  std::lock_guard lock(cache.mutex);
  return cache.entries.size();
}

double dirichlet_energy(const Matrix& field, const TemporalChain& chain) {
  require(field.rows() == chain.horizon(), ErrorKind::kDimension,
          "dirichlet_energy: field has " + std::to_string(field.rows()) + " rows, chain has " +
              std::to_string(chain.horizon()) + " nodes");
  double energy = 0.0;
  const auto& w = chain.edge_weights();
  for (int h = 0; h + 1 < chain.horizon(); ++h) {
    energy += w[h] * (field.row(h + 1) - field.row(h)).squaredNorm();
  }
  return 0.5 * energy;
}

Matrix harmonic_extension(const Matrix& boundary, const TemporalChain& chain) {
  const int horizon = chain.horizon();
  const int a = static_cast<int>(boundary.rows());
  require(a >= 1, ErrorKind::kInvalidArgument, "harmonic_extension: empty boundary");
  if (a >= horizon) return boundary.topRows(horizon);

  const Matrix lap = chain.laplacian();
  const int free_nodes = horizon - a;
  const Matrix l_uu = lap.bottomRightCorner(free_nodes, free_nodes);
  const Matrix l_ub = lap.bottomLeftCorner(free_nodes, a);
  Eigen::LDLT<Matrix> ldlt(l_uu);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive() &&
              ldlt.vectorD().minCoeff() > 0.0,
          ErrorKind::kNumerical,
          "harmonic_extension: interior Laplacian is singular (zero-weight edge cuts the chain)");

  Matrix field(horizon, boundary.cols());
  field.topRows(a) = boundary;
  field.bottomRows(free_nodes) = ldlt.solve(-l_ub * boundary);
  return field;
}

}  // namespace steps
