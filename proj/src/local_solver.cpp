#include "steps/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "steps/errors.hpp"

namespace steps {

void LocalSolverConfig::validate() const {
  require(std::isfinite(smoothness) && smoothness > 0.0, ErrorKind::kConfig,
          "local solver smoothness must be > 0");
  require(std::isfinite(ridge) && ridge > 0.0, ErrorKind::kConfig,
          "ridge coefficient must be > 0");
  require(coefficient_clip >= 0.0, ErrorKind::kConfig, "coefficient clip must be >= 0");
  require(std::isfinite(response_mix), ErrorKind::kConfig, "response mix must be finite");
}

Matrix extract_fast_error(const Matrix& prefix_error) {
  const Eigen::Index a = prefix_error.rows();
  require(a >= 1, ErrorKind::kInvalidArgument, "extract_fast_error: empty prefix");
  if (a == 1) return prefix_error;

  Matrix fast = prefix_error.rowwise() - prefix_error.colwise().mean();
  if (a == 2) return fast;

  // Centered time index makes the constant and slope fits decouple.
  Vector t = Vector::LinSpaced(a, 1.0, static_cast<double>(a));
  t.array() -= t.mean();
  const double sxx = t.squaredNorm();
  for (Eigen::Index c = 0; c < fast.cols(); ++c) {
    const double slope = t.dot(fast.col(c)) / sxx;
    fast.col(c) -= slope * t;
  }
  return fast;
}

Matrix propagate_harmonic(const TransferOperator& op, const Matrix& fast_error) {
  const int a = static_cast<int>(fast_error.rows());
  require(a <= op.horizon(), ErrorKind::kDimension,
          "propagate_harmonic: prefix of " + std::to_string(a) + " rows exceeds horizon " +
              std::to_string(op.horizon()));
  return op.leading_columns(a) * fast_error;
}

Matrix bias_field(const Matrix& prefix_error, int horizon) {
  require(prefix_error.rows() >= 1, ErrorKind::kInvalidArgument, "bias_field: empty prefix");
  const Eigen::RowVectorXd mean = prefix_error.colwise().mean();
  return mean.replicate(horizon, 1);
}

LocalCorrection fit_bounded_response(const Matrix& harmonic, const Matrix& bias,
                                     const Matrix& prefix_error, const LocalSolverConfig& config) {
  config.validate();
  const Eigen::Index a = prefix_error.rows();
  const Eigen::Index d = prefix_error.cols();
  require(a >= 1, ErrorKind::kInvalidArgument, "fit_bounded_response: empty prefix");
  require(harmonic.rows() == bias.rows() && harmonic.cols() == d && bias.cols() == d &&
              harmonic.rows() >= a,
          ErrorKind::kDimension, "fit_bounded_response: basis shapes do not match the prefix");

  LocalCorrection out;
  out.harmonic = harmonic;
  out.bias = bias;
  out.raw_coefficients.resize(2, d);
  out.coefficients.resize(2, d);
  out.short_response.resize(harmonic.rows(), d);

  const double lambda = config.ridge;
  const double b = config.coefficient_clip;
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto u = harmonic.col(c).head(a);
    const auto v = bias.col(c).head(a);
    const auto r = prefix_error.col(c);
    // (B^T B + lambda I) beta = B^T r, B = [u v]; determinant > 0 for lambda > 0.
    const double g11 = u.squaredNorm() + lambda;
    const double g22 = v.squaredNorm() + lambda;
    const double g12 = u.dot(v);
    const double r1 = u.dot(r);
    const double r2 = v.dot(r);
    const double det = g11 * g22 - g12 * g12;
    const double beta1 = (g22 * r1 - g12 * r2) / det;
    const double beta2 = (g11 * r2 - g12 * r1) / det;
    out.raw_coefficients(0, c) = beta1;
    out.raw_coefficients(1, c) = beta2;
    out.coefficients(0, c) = std::clamp(beta1, -b, b);
    out.coefficients(1, c) = std::clamp(beta2, -b, b);
    out.short_response.col(c) = config.response_mix * (harmonic.col(c) * out.coefficients(0, c) +
                                                        bias.col(c) * out.coefficients(1, c));
  }
  return out;
}

LocalCorrection solve_local(const PrefixBoundary& boundary, const LocalSolverConfig& config) {
  const int horizon = boundary.horizon();
  const int d = boundary.channels();
  if (boundary.empty()) {
    LocalCorrection zero;
    zero.harmonic = Matrix::Zero(horizon, d);
    zero.bias = Matrix::Zero(horizon, d);
    zero.coefficients = Matrix::Zero(2, d);
    zero.raw_coefficients = Matrix::Zero(2, d);
    zero.short_response = Matrix::Zero(horizon, d);
    return zero;
  }
  const auto op = build_transfer_operator(horizon, config.smoothness);
  const Matrix harmonic = propagate_harmonic(*op, extract_fast_error(boundary.prefix_error));
  const Matrix bias = bias_field(boundary.prefix_error, horizon);
  return fit_bounded_response(harmonic, bias, boundary.prefix_error, config);
}

}  // namespace steps
