#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "steps/param_file.hpp"
#include "steps/types.hpp"

namespace steps {

/// One rollout unit. `target` holds the H future rows when the harness has
/// them; forecasters other than the oracle fixture never read it.
struct SeriesWindow {
  Matrix lookback;  // L x d
  Matrix target;    // H x d, or empty
  std::int64_t origin = 0;  // series index of the first target row
};

enum class BackboneKind { kLinear, kNaiveLast, kSeasonalNaive, kOracleWithBias };

const char* to_string(BackboneKind kind) noexcept;
BackboneKind backbone_kind_from_string(const std::string& name);

/// Frozen forecaster f_theta. Immutable after construction.
class Forecaster {
 public:
  Forecaster(int lookback, int horizon, int channels);
  virtual ~Forecaster() = default;

  int lookback() const noexcept { return lookback_; }
  int horizon() const noexcept { return horizon_; }
  int channels() const noexcept { return channels_; }

  virtual BackboneKind kind() const noexcept = 0;
  /// H x d forecast for a window whose lookback is L x d.
  Matrix predict(const SeriesWindow& window) const;
  /// Convenience for forecasters that only need the lookback.
  Matrix predict(const Matrix& lookback) const;

  /// Hash of the parameter block; used to prove the frozen contract.
  virtual std::uint64_t digest() const = 0;
  virtual ParamFile to_param_file() const = 0;

 protected:
  virtual Matrix predict_checked(const SeriesWindow& window) const = 0;
  ParamFile base_param_file() const;

 private:
  int lookback_;
  int horizon_;
  int channels_;
};

using ForecasterPtr = std::shared_ptr<const Forecaster>;

/// Per-channel direct multi-step ridge regression with intercept.
class LinearForecaster final : public Forecaster {
 public:
  LinearForecaster(std::vector<Matrix> weights, Matrix intercept, double ridge);

  BackboneKind kind() const noexcept override { return BackboneKind::kLinear; }
  std::uint64_t digest() const override;
  ParamFile to_param_file() const override;

  const std::vector<Matrix>& weights() const noexcept { return weights_; }  // H x L each
  const Matrix& intercept() const noexcept { return intercept_; }           // H x d
  double ridge() const noexcept { return ridge_; }

 protected:
  Matrix predict_checked(const SeriesWindow& window) const override;

 private:
  std::vector<Matrix> weights_;
  Matrix intercept_;
  double ridge_;
};

/// Fits the H x L map per channel over every sliding window of `train`.
/// Requires T >= L + H + 1 and ridge > 0.
std::shared_ptr<const LinearForecaster> fit_linear_backbone(const Matrix& train, int lookback,
                                                            int horizon, double ridge);

/// Repeats the final lookback row.
class NaiveLastForecaster final : public Forecaster {
 public:
  using Forecaster::Forecaster;
  BackboneKind kind() const noexcept override { return BackboneKind::kNaiveLast; }
  std::uint64_t digest() const override { return 0; }
  ParamFile to_param_file() const override;

 protected:
  Matrix predict_checked(const SeriesWindow& window) const override;
};

/// Repeats the last full period of the lookback.
class SeasonalNaiveForecaster final : public Forecaster {
 public:
  SeasonalNaiveForecaster(int lookback, int horizon, int channels, int period);
  BackboneKind kind() const noexcept override { return BackboneKind::kSeasonalNaive; }
  std::uint64_t digest() const override { return static_cast<std::uint64_t>(period_); }
  ParamFile to_param_file() const override;
  int period() const noexcept { return period_; }

 protected:
  Matrix predict_checked(const SeriesWindow& window) const override;

 private:
  int period_;
};

/// Test fixture: ground truth plus a fixed systematic bias field.
class OracleBiasForecaster final : public Forecaster {
 public:
  OracleBiasForecaster(int lookback, Matrix bias);
  static std::shared_ptr<const OracleBiasForecaster> constant(int lookback, int horizon,
                                                              int channels, double bias);

  BackboneKind kind() const noexcept override { return BackboneKind::kOracleWithBias; }
  std::uint64_t digest() const override;
  ParamFile to_param_file() const override;
  const Matrix& bias() const noexcept { return bias_; }

 protected:
  Matrix predict_checked(const SeriesWindow& window) const override;

 private:
  Matrix bias_;
};

/// Per-window, per-channel standardization statistics of a lookback.
struct WindowScaler {
  static constexpr double kStdFloor = 1e-8;

  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;

  static WindowScaler fit(const Matrix& lookback);
  Matrix normalize(const Matrix& values) const;
  Matrix denormalize(const Matrix& values) const;
};

/// Standardizes each window with its lookback statistics around an inner
/// forecaster; the identity when disabled.
class NormalizingForecaster final : public Forecaster {
 public:
  NormalizingForecaster(ForecasterPtr inner, bool enabled);

  BackboneKind kind() const noexcept override { return inner_->kind(); }
  std::uint64_t digest() const override { return inner_->digest() ^ (enabled_ ? 0x5bd1e995ULL : 0); }
  ParamFile to_param_file() const override;
  bool enabled() const noexcept { return enabled_; }
  const Forecaster& inner() const noexcept { return *inner_; }

 protected:
  Matrix predict_checked(const SeriesWindow& window) const override;

 private:
  ForecasterPtr inner_;
  bool enabled_;
};

ForecasterPtr wrap_normalization(ForecasterPtr inner, bool enabled);

ForecasterPtr forecaster_from_param_file(const ParamFile& file);

}  // namespace steps
