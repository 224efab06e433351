#pragma once

#include "steps/prefix_boundary.hpp"
#include "steps/temporal_manifold.hpp"
#include "steps/types.hpp"

namespace steps {

struct LocalSolverConfig {
  double smoothness = 0.15;    // alpha in P = (D^T D + alpha I)^{-1}
  double ridge = 0.03;         // ridge coefficient of the 2-basis fit
  double coefficient_clip = 0.5;
  double response_mix = 0.55;  // lambda_short

  void validate() const;
};

/// Result of the closed-form local branch.
struct LocalCorrection {
  Matrix harmonic;      // H x d, propagated fast error
  Matrix bias;          // H x d, rows all equal the prefix mean error
  Matrix coefficients;  // 2 x d, clipped (harmonic, bias) weights per channel
  Matrix raw_coefficients;
  Matrix short_response;  // H x d
};

/// Removes the least-squares constant+linear trend from each channel
/// (constant only for a = 2, nothing for a = 1).
Matrix extract_fast_error(const Matrix& prefix_error);

/// P[:, 0:a] * fast_error.
Matrix propagate_harmonic(const TransferOperator& op, const Matrix& fast_error);

/// Rank-one field repeating the column means of the prefix error.
Matrix bias_field(const Matrix& prefix_error, int horizon);

/// Per-channel ridge fit of the prefix error on [harmonic, bias] restricted
/// to the prefix rows, coefficient clipping, and response scaling.
LocalCorrection fit_bounded_response(const Matrix& harmonic, const Matrix& bias,
                                     const Matrix& prefix_error, const LocalSolverConfig& config);

/// Runs the full local branch for one boundary. An empty boundary yields an
/// all-zero correction.
LocalCorrection solve_local(const PrefixBoundary& boundary, const LocalSolverConfig& config);

}  // namespace steps
