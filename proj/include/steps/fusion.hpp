#pragma once

#include <limits>
#include <utility>

#include "steps/types.hpp"

namespace steps {

/// Horizon-aware mixing of the local and global responses.
struct FusionSchedule {
  double global_mix = 0.7;      // gamma
  double ramp_sharpness = 8.0;  // kappa
  double ramp_midpoint = 0.25;  // tau
  double clip = 2.5;            // c; +inf disables the bound

  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  void validate() const;
};

/// Normalized position of 1-indexed step h on the horizon: (h-1)/(H-1),
/// so the first step sits at 0 and the last at 1.
double horizon_position(int step, int horizon);

/// q(h) = sigmoid(kappa * (position(h) - tau)).
double ramp(int step, int horizon, const FusionSchedule& schedule);

/// gamma * q(h) for h = 1..H.
Vector global_gain(int horizon, const FusionSchedule& schedule);

/// clip(short + gamma q(h) long, -c, c) elementwise. Rejects NaN input.
Matrix fuse(const Matrix& short_response, const Matrix& long_response,
            const FusionSchedule& schedule);

/// (w_local, w_global) = (1, gamma q) / (1 + gamma q).
std::pair<double, double> normalized_shares(const FusionSchedule& schedule, int step, int horizon);

/// Step where the ramp crosses its midpoint, round(tau * H).
int transition_step(const FusionSchedule& schedule, int horizon);

/// forecast + delta.
Matrix apply_correction(const Matrix& forecast, const Matrix& delta);

}  // namespace steps
