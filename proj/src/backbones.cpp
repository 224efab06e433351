#include "steps/backbones.hpp"

#include <cmath>
#include <string>

#include "steps/errors.hpp"
#include "steps/kernels.hpp"

namespace steps {

const char* to_string(BackboneKind kind) noexcept {
  switch (kind) {
    case BackboneKind::kLinear: return "linear";
    case BackboneKind::kNaiveLast: return "naive-last";
    case BackboneKind::kSeasonalNaive: return "seasonal-naive";
    case BackboneKind::kOracleWithBias: return "oracle-with-bias";
  }
  return "unknown";
}

BackboneKind backbone_kind_from_string(const std::string& name) {
  for (auto kind : {BackboneKind::kLinear, BackboneKind::kNaiveLast, BackboneKind::kSeasonalNaive,
                    BackboneKind::kOracleWithBias}) {
    if (name == to_string(kind)) return kind;
  }
  fail(ErrorKind::kConfig, "unknown backbone kind '" + name + "'");
}

Forecaster::Forecaster(int lookback, int horizon, int channels)
    : lookback_(lookback), horizon_(horizon), channels_(channels) {
  require(lookback >= 1 && horizon >= 1 && channels >= 1, ErrorKind::kInvalidArgument,
          "forecaster dimensions must be positive");
}

Matrix Forecaster::predict(const SeriesWindow& window) const {
  require(window.lookback.rows() == lookback_ && window.lookback.cols() == channels_,
          ErrorKind::kDimension,
          "forecaster expects a " + std::to_string(lookback_) + "x" + std::to_string(channels_) +
              " lookback, got " + std::to_string(window.lookback.rows()) + "x" +
              std::to_string(window.lookback.cols()));
  Matrix out = predict_checked(window);
  require(out.rows() == horizon_ && out.cols() == channels_, ErrorKind::kDimension,
          "forecaster produced a wrongly shaped forecast");
  return out;
}

Matrix Forecaster::predict(const Matrix& lookback) const {
  SeriesWindow window;
  window.lookback = lookback;
  return predict(window);
}

ParamFile Forecaster::base_param_file() const {
  ParamFile file;
  file.kind = "backbone";
  file.header = {{"backbone", to_string(kind())},
                 {"lookback", lookback_},
                 {"horizon", horizon_},
                 {"channels", channels_},
                 {"normalize", false}};
  return file;
}

// ---------------------------------------------------------------------------

LinearForecaster::LinearForecaster(std::vector<Matrix> weights, Matrix intercept, double ridge)
    : Forecaster(weights.empty() ? 0 : static_cast<int>(weights.front().cols()),
                 static_cast<int>(intercept.rows()), static_cast<int>(intercept.cols())),
      weights_(std::move(weights)),
      intercept_(std::move(intercept)),
      ridge_(ridge) {
  require(static_cast<int>(weights_.size()) == channels(), ErrorKind::kDimension,
          "linear backbone needs one weight matrix per channel");
  for (const auto& w : weights_) {
    require(w.rows() == horizon() && w.cols() == lookback(), ErrorKind::kDimension,
            "linear backbone weight matrices must all be H x L");
  }
}

Matrix LinearForecaster::predict_checked(const SeriesWindow& window) const {
  Matrix out(horizon(), channels());
  for (int c = 0; c < channels(); ++c) {
    out.col(c) = weights_[c] * window.lookback.col(c) + intercept_.col(c);
  }
  return out;
}

std::uint64_t LinearForecaster::digest() const {
  std::uint64_t h = digest_matrices({&intercept_});
  for (const auto& w : weights_) h = h * 31 + digest_matrices({&w});
  return h;
}

ParamFile LinearForecaster::to_param_file() const {
  ParamFile file = base_param_file();
  file.header["ridge"] = ridge_;
  for (int c = 0; c < channels(); ++c) {
    file.blocks.push_back({"weights_" + std::to_string(c), weights_[c]});
  }
  file.blocks.push_back({"intercept", intercept_});
  return file;
}

std::shared_ptr<const LinearForecaster> fit_linear_backbone(const Matrix& train, int lookback,
                                                            int horizon, double ridge) {
  auto maps = kernels::fit_channel_maps_parallel(train, lookback, horizon, ridge);
  std::vector<Matrix> weights;
  Matrix intercept(horizon, train.cols());
  for (std::size_t c = 0; c < maps.size(); ++c) {
    weights.push_back(std::move(maps[c].weights));
    intercept.col(static_cast<Eigen::Index>(c)) = maps[c].intercept;
  }
  return std::make_shared<const LinearForecaster>(std::move(weights), std::move(intercept), ridge);
}

// ---------------------------------------------------------------------------

Matrix NaiveLastForecaster::predict_checked(const SeriesWindow& window) const {
  return window.lookback.bottomRows(1).replicate(horizon(), 1);
}

ParamFile NaiveLastForecaster::to_param_file() const { return base_param_file(); }

SeasonalNaiveForecaster::SeasonalNaiveForecaster(int lookback, int horizon, int channels,
                                                 int period)
    : Forecaster(lookback, horizon, channels), period_(period) {
  require(period >= 1 && period <= lookback, ErrorKind::kInvalidArgument,
          "seasonal period must lie in [1, L]");
}

Matrix SeasonalNaiveForecaster::predict_checked(const SeriesWindow& window) const {
  Matrix out(horizon(), channels());
  const int start = lookback() - period_;
  for (int h = 0; h < horizon(); ++h) out.row(h) = window.lookback.row(start + h % period_);
  return out;
}

ParamFile SeasonalNaiveForecaster::to_param_file() const {
  ParamFile file = base_param_file();
  file.header["period"] = period_;
  return file;
}

// ---------------------------------------------------------------------------

OracleBiasForecaster::OracleBiasForecaster(int lookback, Matrix bias)
    : Forecaster(lookback, static_cast<int>(bias.rows()), static_cast<int>(bias.cols())),
      bias_(std::move(bias)) {
  require(bias_.allFinite(), ErrorKind::kInvalidArgument, "oracle bias must be finite");
}

std::shared_ptr<const OracleBiasForecaster> OracleBiasForecaster::constant(int lookback,
                                                                           int horizon,
                                                                           int channels,
                                                                           double bias) {
  return std::make_shared<const OracleBiasForecaster>(lookback,
                                                      Matrix::Constant(horizon, channels, bias));
}

Matrix OracleBiasForecaster::predict_checked(const SeriesWindow& window) const {
  require(window.target.rows() == horizon() && window.target.cols() == channels(),
          ErrorKind::kDimension, "oracle-with-bias forecaster needs the window target");
  return window.target + bias_;
}

std::uint64_t OracleBiasForecaster::digest() const { return digest_matrices({&bias_}); }

ParamFile OracleBiasForecaster::to_param_file() const {
  ParamFile file = base_param_file();
  file.blocks.push_back({"bias", bias_});
  return file;
}

// ---------------------------------------------------------------------------

WindowScaler WindowScaler::fit(const Matrix& lookback) {
  WindowScaler s;
  s.mean = lookback.colwise().mean();
  s.stddev = ((lookback.rowwise() - s.mean).array().square().colwise().mean()).sqrt();
  s.stddev = s.stddev.cwiseMax(kStdFloor);
  return s;
}

Matrix WindowScaler::normalize(const Matrix& values) const {
  return ((values.rowwise() - mean).array().rowwise() / stddev.array()).matrix();
}

Matrix WindowScaler::denormalize(const Matrix& values) const {
  return ((values.array().rowwise() * stddev.array()).rowwise() + mean.array()).matrix();
}

NormalizingForecaster::NormalizingForecaster(ForecasterPtr inner, bool enabled)
    : Forecaster(inner->lookback(), inner->horizon(), inner->channels()),
      inner_(std::move(inner)),
      enabled_(enabled) {}

Matrix NormalizingForecaster::predict_checked(const SeriesWindow& window) const {
  if (!enabled_) return inner_->predict(window);
  const WindowScaler scaler = WindowScaler::fit(window.lookback);
  SeriesWindow scaled;
  scaled.origin = window.origin;
  scaled.lookback = scaler.normalize(window.lookback);
  if (window.target.size() > 0) scaled.target = scaler.normalize(window.target);
  return scaler.denormalize(inner_->predict(scaled));
}

ParamFile NormalizingForecaster::to_param_file() const {
  ParamFile file = inner_->to_param_file();
  file.header["normalize"] = enabled_;
  return file;
}

ForecasterPtr wrap_normalization(ForecasterPtr inner, bool enabled) {
  return std::make_shared<const NormalizingForecaster>(std::move(inner), enabled);
}

ForecasterPtr forecaster_from_param_file(const ParamFile& file) {
  require(file.kind == "backbone", ErrorKind::kData,
          "expected a backbone parameter file, got '" + file.kind + "'");
  const auto& h = file.header;
  const auto kind = backbone_kind_from_string(h.at("backbone").get<std::string>());
  const int lookback = h.at("lookback").get<int>();
  const int horizon = h.at("horizon").get<int>();
  const int channels = h.at("channels").get<int>();

  ForecasterPtr model;
  switch (kind) {
    case BackboneKind::kLinear: {
      std::vector<Matrix> weights;
      for (int c = 0; c < channels; ++c) weights.push_back(file.block("weights_" + std::to_string(c)));
      model = std::make_shared<const LinearForecaster>(std::move(weights), file.block("intercept"),
                                                       h.at("ridge").get<double>());
      break;
    }
    case BackboneKind::kNaiveLast:
      model = std::make_shared<const NaiveLastForecaster>(lookback, horizon, channels);
      break;
    case BackboneKind::kSeasonalNaive:
      model = std::make_shared<const SeasonalNaiveForecaster>(lookback, horizon, channels,
                                                              h.at("period").get<int>());
      break;
    case BackboneKind::kOracleWithBias:
      model = std::make_shared<const OracleBiasForecaster>(lookback, file.block("bias"));
      break;
  }
  require(model->lookback() == lookback && model->horizon() == horizon &&
              model->channels() == channels,
          ErrorKind::kData, "backbone blocks disagree with the file header");
  if (h.value("normalize", false)) model = wrap_normalization(model, true);
  return model;
}

}  // namespace steps
