#pragma once

#include <cstdint>
#include <vector>

#include "steps/types.hpp"

namespace steps {

/// Dirichlet boundary of the error field: the revealed prefix error, its
/// zero-padded full-horizon tensor and the observation mask.
struct PrefixBoundary {
  int length = 0;       // a; 0 means a pure zero-shot window
  Matrix prefix_error;  // a x d
  Matrix padded_error;  // H x d, rows >= a are zero
  Vector mask;          // H, 1 on observed steps

  bool empty() const noexcept { return length == 0; }
  int horizon() const noexcept { return static_cast<int>(padded_error.rows()); }
  int channels() const noexcept { return static_cast<int>(padded_error.cols()); }
};

/// Dominant period of the lookback via the mean FFT amplitude spectrum.
/// Constant input returns `fallback_period`. Ties go to the lower frequency.
int estimate_dominant_period(const Matrix& lookback, int fallback_period = 2);

/// Prefix length given the estimated period and the number of revealed steps.
int select_prefix_length(int period, int revealed_count, int horizon, int min_support);

/// R_a = observed_prefix - forecast(0:a). `a` = observed_prefix.rows().
/// a = 0 produces the empty sentinel (zero padded error, zero mask).
PrefixBoundary build_boundary(const Matrix& observed_prefix, const Matrix& forecast);

/// Boundary from scattered anchors inside the first `support` steps: the
/// residual is observed - forecast at anchor rows and zero elsewhere in the
/// support; the mask marks only the anchors.
PrefixBoundary build_anchor_boundary(const Matrix& truth, const Matrix& forecast, int support,
                                     const std::vector<int>& anchor_rows);

/// Replaces ceil(ratio * a) prefix observations per channel by outliers of
/// value +/- 6 sigma_c (sign uniform, positions without replacement) and
/// rebuilds the boundary from the corrupted observations.
PrefixBoundary contaminate_prefix(const PrefixBoundary& boundary, const Matrix& forecast,
                                  double ratio, const Vector& sigma, std::uint64_t seed);

/// Number of positions contaminate_prefix corrupts per channel.
int contaminated_count(double ratio, int prefix_length);

/// Outlier magnitude in units of the per-channel standard deviation.
inline constexpr double kOutlierSigmas = 6.0;

}  // namespace steps
