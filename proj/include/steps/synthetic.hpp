#pragma once

#include <cstdint>
#include <vector>

#include "steps/dataset.hpp"

namespace steps {

/// Multichannel seasonal stream: daily + weekly sinusoids with per-channel
/// phases, Gaussian noise, and an optional random-walk level that shifts the
/// distribution over time.
struct SeasonalStreamSpec {
  Eigen::Index length = 24000;
  int channels = 3;
  std::vector<double> periods = {24.0, 168.0};
  std::vector<double> amplitudes = {1.0, 0.5};
  double noise = 0.1;
  double level_walk = 0.0;  // std of the per-step level increment
  std::uint64_t seed = 7;
};

Dataset make_seasonal_stream(const SeasonalStreamSpec& spec);

}  // namespace steps
