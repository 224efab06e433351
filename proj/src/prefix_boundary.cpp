#include "steps/prefix_boundary.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "steps/errors.hpp"
#include "steps/rng.hpp"

namespace steps {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Amplitude spectrum |X_k|, k = 0..L/2, of one mean-removed channel.
std::vector<double> amplitude_spectrum(const Vector& channel) {
  const int n = static_cast<int>(channel.size());
  const int bins = n / 2 + 1;
  std::vector<double> in(channel.data(), channel.data() + n);
  const double mean = std::accumulate(in.begin(), in.end(), 0.0) / n;
  for (double& v : in) v -= mean;

  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::vector<double> amplitude(bins);
  for (int k = 0; k < bins; ++k) amplitude[k] = std::hypot(out[k][0], out[k][1]);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  return amplitude;
}

}  // namespace

int estimate_dominant_period(const Matrix& lookback, int fallback_period) {
  const int length = static_cast<int>(lookback.rows());
  require(length >= 4, ErrorKind::kInvalidArgument,
          "estimate_dominant_period needs a lookback of at least 4 steps");
  require(lookback.cols() >= 1, ErrorKind::kDimension, "lookback has no channels");
  require(lookback.allFinite(), ErrorKind::kNumerical, "lookback contains non-finite values");

  const int bins = length / 2 + 1;
  std::vector<double> mean_amplitude(bins, 0.0);
  for (Eigen::Index c = 0; c < lookback.cols(); ++c) {
    const auto amplitude = amplitude_spectrum(lookback.col(c));
    for (int k = 0; k < bins; ++k) mean_amplitude[k] += amplitude[k] / lookback.cols();
  }

  int best_bin = 0;
  double best = 0.0;
  for (int k = 1; k < bins; ++k) {
    // Strictly larger (beyond rounding) keeps the lowest frequency on ties.
    if (mean_amplitude[k] > best * (1.0 + 1e-9) + 1e-300) {
      best = mean_amplitude[k];
      best_bin = k;
    }
  }
  const double scale = lookback.cwiseAbs().maxCoeff();
  if (best_bin == 0 || best <= 1e-12 * length * std::max(scale, 1e-300)) {
    return fallback_period;
  }
  const int period = static_cast<int>(std::lround(static_cast<double>(length) / best_bin));
  return std::clamp(period, 2, length);
}

int select_prefix_length(int period, int revealed_count, int horizon, int min_support) {
  if (revealed_count <= 0) return 0;
  int a = std::min({period, revealed_count, horizon});
  a = std::max(a, std::min(min_support, revealed_count));
  return std::min(a, horizon);
}

PrefixBoundary build_boundary(const Matrix& observed_prefix, const Matrix& forecast) {
  const int a = static_cast<int>(observed_prefix.rows());
  const int horizon = static_cast<int>(forecast.rows());
  require(a <= horizon, ErrorKind::kInvalidArgument,
          "prefix length " + std::to_string(a) + " exceeds horizon " + std::to_string(horizon));
  require(a == 0 || observed_prefix.cols() == forecast.cols(), ErrorKind::kDimension,
          "prefix and forecast channel counts differ");

  PrefixBoundary boundary;
  boundary.length = a;
  boundary.padded_error = Matrix::Zero(horizon, forecast.cols());
  boundary.mask = Vector::Zero(horizon);
  if (a == 0) {
    boundary.prefix_error = Matrix(0, forecast.cols());
    return boundary;
  }
  boundary.prefix_error = observed_prefix - forecast.topRows(a);
  boundary.padded_error.topRows(a) = boundary.prefix_error;
  boundary.mask.head(a).setOnes();
  return boundary;
}

PrefixBoundary build_anchor_boundary(const Matrix& truth, const Matrix& forecast, int support,
                                     const std::vector<int>& anchor_rows) {
  const int horizon = static_cast<int>(forecast.rows());
  require(truth.rows() == forecast.rows() && truth.cols() == forecast.cols(),
          ErrorKind::kDimension, "anchor boundary: truth and forecast shapes differ");
  require(support >= 1 && support <= horizon, ErrorKind::kInvalidArgument,
          "anchor support must lie in [1, H]");

  PrefixBoundary boundary;
  boundary.padded_error = Matrix::Zero(horizon, forecast.cols());
  boundary.mask = Vector::Zero(horizon);
  if (anchor_rows.empty()) {
    boundary.prefix_error = Matrix(0, forecast.cols());
    return boundary;
  }
  boundary.length = support;
  for (int row : anchor_rows) {
    require(row >= 0 && row < support, ErrorKind::kInvalidArgument,
            "anchor row outside the support window");
    boundary.padded_error.row(row) = truth.row(row) - forecast.row(row);
    boundary.mask(row) = 1.0;
  }
  boundary.prefix_error = boundary.padded_error.topRows(support);
  return boundary;
}

int contaminated_count(double ratio, int prefix_length) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorKind::kInvalidArgument,
          "invalid contamination ratio " + std::to_string(ratio) + " (must be in [0,1])");
  // Guard against products like 0.1 * 30 = 3.0000000000000004.
  const double raw = ratio * prefix_length;
  return std::min(prefix_length, static_cast<int>(std::ceil(raw - 1e-9)));
}

PrefixBoundary contaminate_prefix(const PrefixBoundary& boundary, const Matrix& forecast,
                                  double ratio, const Vector& sigma, std::uint64_t seed) {
  const int count = contaminated_count(ratio, boundary.length);
  if (count == 0 || boundary.empty()) return boundary;
  const int a = boundary.length;
  require(forecast.rows() >= a && forecast.cols() == boundary.channels(), ErrorKind::kDimension,
          "contaminate_prefix: forecast does not match the boundary");
  require(sigma.size() == boundary.channels(), ErrorKind::kDimension,
          "contaminate_prefix: one sigma per channel required");

  Matrix observed = boundary.prefix_error + forecast.topRows(a);
  Rng rng(seed);
  std::vector<int> positions(a);
  for (Eigen::Index c = 0; c < observed.cols(); ++c) {
    std::iota(positions.begin(), positions.end(), 0);
    // Partial Fisher-Yates: the first `count` slots are the sample.
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(a - i)));
      std::swap(positions[i], positions[j]);
      const double sign = rng.coin() ? 1.0 : -1.0;
      observed(positions[i], c) = sign * kOutlierSigmas * sigma(c);
    }
  }
  return build_boundary(observed, forecast);
}

}  // namespace steps
