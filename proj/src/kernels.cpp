#include "steps/kernels.hpp"

#include <omp.h>

#include <exception>
#include <string>

#include "steps/backbones.hpp"
#include "steps/errors.hpp"
#include "steps/memory_decoder.hpp"
#include "steps/solver.hpp"

namespace steps::kernels {

namespace {

void decoder_column(const DecoderParams& p, const Matrix& features, Matrix& out, Eigen::Index n) {
  const Vector hidden = (p.w1 * features.col(n) + p.b1).array().tanh().matrix();
  out.col(n) = p.output_scale * (p.w2 * hidden + p.b2);
}

void check_decoder_shapes(const DecoderParams& p, const Matrix& features, Matrix& out) {
  require(features.rows() == p.input_width(), ErrorKind::kDimension,
          "decoder kernel: feature rows do not match the parameters");
  out.resize(p.horizon, features.cols());
}

ChannelMap fit_channel(const Matrix& series, Eigen::Index channel, int lookback, int horizon,
                       double ridge) {
  const Eigen::Index windows = series.rows() - lookback - horizon + 1;
  Matrix x(windows, lookback);
  Matrix y(windows, horizon);
  for (Eigen::Index t = 0; t < windows; ++t) {
    x.row(t) = series.col(channel).segment(t, lookback).transpose();
    y.row(t) = series.col(channel).segment(t + lookback, horizon).transpose();
  }
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  x.rowwise() -= x_mean;
  y.rowwise() -= y_mean;

  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(gram);
  require(llt.info() == Eigen::Success, ErrorKind::kNumerical,
          "linear backbone normal equations are not positive definite");
  const Matrix coef = llt.solve(x.transpose() * y);  // L x H

  ChannelMap map;
  map.weights = coef.transpose();
  map.intercept = y_mean.transpose() - map.weights * x_mean.transpose();
  return map;
}

void check_fit_inputs(const Matrix& series, int lookback, int horizon, double ridge) {
  require(lookback >= 1 && horizon >= 1, ErrorKind::kInvalidArgument,
          "lookback and horizon must be positive");
  require(series.rows() >= lookback + horizon + 1, ErrorKind::kData,
          "insufficient training data: need T >= L + H + 1 = " +
              std::to_string(lookback + horizon + 1) + ", have " + std::to_string(series.rows()));
  require(ridge > 0.0 && std::isfinite(ridge), ErrorKind::kInvalidArgument,
          "ridge strength must be > 0");
  require(series.allFinite(), ErrorKind::kData, "training series contains non-finite values");
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void decoder_forward_serial(const DecoderParams& params, const Matrix& features, Matrix& out) {
  check_decoder_shapes(params, features, out);
  for (Eigen::Index n = 0; n < features.cols(); ++n) decoder_column(params, features, out, n);
}

void decoder_forward_parallel(const DecoderParams& params, const Matrix& features, Matrix& out) {
  check_decoder_shapes(params, features, out);
  const Eigen::Index columns = features.cols();
#pragma omp parallel for schedule(static) if (columns > 1)
  for (Eigen::Index n = 0; n < columns; ++n) decoder_column(params, features, out, n);
}

std::vector<ChannelMap> fit_channel_maps_serial(const Matrix& series, int lookback, int horizon,
                                                double ridge) {
  check_fit_inputs(series, lookback, horizon, ridge);
  std::vector<ChannelMap> maps(series.cols());
  for (Eigen::Index c = 0; c < series.cols(); ++c) {
    maps[c] = fit_channel(series, c, lookback, horizon, ridge);
  }
  return maps;
}

std::vector<ChannelMap> fit_channel_maps_parallel(const Matrix& series, int lookback, int horizon,
                                                  double ridge) {
  check_fit_inputs(series, lookback, horizon, ridge);
  const Eigen::Index channels = series.cols();
  std::vector<ChannelMap> maps(channels);
  // Exceptions must not cross the OpenMP region boundary.
  std::vector<std::exception_ptr> errors(channels);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < channels; ++c) {
    try {
      maps[c] = fit_channel(series, c, lookback, horizon, ridge);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return maps;
}

std::vector<Matrix> predict_windows_serial(const LinearForecaster& model,
                                           std::span<const Matrix> lookbacks) {
  std::vector<Matrix> out(lookbacks.size());
  for (std::size_t i = 0; i < lookbacks.size(); ++i) out[i] = model.predict(lookbacks[i]);
  return out;
}

std::vector<Matrix> predict_windows_parallel(const LinearForecaster& model,
                                             std::span<const Matrix> lookbacks) {
  const auto count = static_cast<std::int64_t>(lookbacks.size());
  std::vector<Matrix> out(lookbacks.size());
  std::vector<std::exception_ptr> errors(lookbacks.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      out[i] = model.predict(lookbacks[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return out;
}

std::vector<CorrectionField> correct_batch_serial(const StepsSolver& solver,
                                                  std::span<const CorrectionTask> tasks,
                                                  const Matrix& memory_template,
                                                  const Vector& context) {
  std::vector<CorrectionField> out(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out[i] = solver.correct(*tasks[i].forecast, *tasks[i].boundary, memory_template, context);
  }
  return out;
}

std::vector<CorrectionField> correct_batch_parallel(const StepsSolver& solver,
                                                    std::span<const CorrectionTask> tasks,
                                                    const Matrix& memory_template,
                                                    const Vector& context) {
  const auto count = static_cast<std::int64_t>(tasks.size());
  std::vector<CorrectionField> out(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      out[i] = solver.correct(*tasks[i].forecast, *tasks[i].boundary, memory_template, context);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return out;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace steps::kernels
