#include "steps/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "steps/errors.hpp"

namespace steps {

void FusionSchedule::validate() const {
  require(clip > 0.0 && !std::isnan(clip), ErrorKind::kConfig, "final correction clip must be > 0");
  require(ramp_sharpness > 0.0 && std::isfinite(ramp_sharpness), ErrorKind::kConfig,
          "ramp sharpness must be > 0");
  require(ramp_midpoint >= 0.0 && ramp_midpoint <= 1.0, ErrorKind::kConfig,
          "ramp midpoint must lie in [0,1]");
  require(global_mix >= 0.0 && std::isfinite(global_mix), ErrorKind::kConfig,
          "global mixing must be >= 0");
}

double horizon_position(int step, int horizon) {
  require(horizon >= 1 && step >= 1 && step <= horizon, ErrorKind::kInvalidArgument,
          "ramp step " + std::to_string(step) + " outside 1.." + std::to_string(horizon));
  if (horizon == 1) return 1.0;
  return static_cast<double>(step - 1) / static_cast<double>(horizon - 1);
}

double ramp(int step, int horizon, const FusionSchedule& schedule) {
  const double x = schedule.ramp_sharpness * (horizon_position(step, horizon) - schedule.ramp_midpoint);
  return 1.0 / (1.0 + std::exp(-x));
}

Vector global_gain(int horizon, const FusionSchedule& schedule) {
  Vector gain(horizon);
  for (int h = 1; h <= horizon; ++h) gain(h - 1) = schedule.global_mix * ramp(h, horizon, schedule);
  return gain;
}

Matrix fuse(const Matrix& short_response, const Matrix& long_response,
            const FusionSchedule& schedule) {
  schedule.validate();
  require(short_response.rows() == long_response.rows() &&
              short_response.cols() == long_response.cols(),
          ErrorKind::kDimension, "fuse: local and global responses differ in shape");
  require(!short_response.hasNaN() && !long_response.hasNaN(), ErrorKind::kNumerical,
          "fuse: NaN in a correction response");
  const int horizon = static_cast<int>(short_response.rows());
  if (horizon == 0) return short_response;
  const Vector gain = global_gain(horizon, schedule);
  Matrix delta(short_response.rows(), short_response.cols());
  for (Eigen::Index c = 0; c < delta.cols(); ++c) {
    for (Eigen::Index h = 0; h < delta.rows(); ++h) {
      // gain is 0 when gamma is 0; skip the product so inf * 0 stays out.
      const double global = gain(h) == 0.0 ? 0.0 : gain(h) * long_response(h, c);
      delta(h, c) = std::clamp(short_response(h, c) + global, -schedule.clip, schedule.clip);
    }
  }
  return delta;
}

std::pair<double, double> normalized_shares(const FusionSchedule& schedule, int step, int horizon) {
  const double g = schedule.global_mix * ramp(step, horizon, schedule);
  return {1.0 / (1.0 + g), g / (1.0 + g)};
}

int transition_step(const FusionSchedule& schedule, int horizon) {
  return static_cast<int>(std::lround(schedule.ramp_midpoint * horizon));
}

Matrix apply_correction(const Matrix& forecast, const Matrix& delta) {
  require(forecast.rows() == delta.rows() && forecast.cols() == delta.cols(), ErrorKind::kDimension,
          "apply_correction: forecast and correction differ in shape");
  return forecast + delta;
}

}  // namespace steps
