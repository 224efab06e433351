#pragma once

// Data-parallel kernels. Each OpenMP version has a serial reference with the
// same per-item arithmetic, so the two agree bit for bit; tests compare them
// and bench/ times them.

#include <span>
#include <vector>

#include "steps/types.hpp"

namespace steps {

struct DecoderParams;
class LinearForecaster;
class StepsSolver;
struct CorrectionField;
struct PrefixBoundary;

namespace kernels {

/// out(:, n) = scale * (W2 tanh(W1 features(:, n) + b1) + b2).
void decoder_forward_serial(const DecoderParams& params, const Matrix& features, Matrix& out);
void decoder_forward_parallel(const DecoderParams& params, const Matrix& features, Matrix& out);

/// Ridge map of one channel: weights H x L, intercept H.
struct ChannelMap {
  Matrix weights;
  Vector intercept;
};

/// Fits one direct multi-step ridge map per channel of `series` (T x d).
std::vector<ChannelMap> fit_channel_maps_serial(const Matrix& series, int lookback, int horizon,
                                                double ridge);
std::vector<ChannelMap> fit_channel_maps_parallel(const Matrix& series, int lookback, int horizon,
                                                  double ridge);

/// Linear-backbone forecasts for a batch of lookbacks.
std::vector<Matrix> predict_windows_serial(const LinearForecaster& model,
                                           std::span<const Matrix> lookbacks);
std::vector<Matrix> predict_windows_parallel(const LinearForecaster& model,
                                             std::span<const Matrix> lookbacks);

/// One window of a correction batch sharing a memory snapshot.
struct CorrectionTask {
  const Matrix* forecast;
  const PrefixBoundary* boundary;
};

std::vector<CorrectionField> correct_batch_serial(const StepsSolver& solver,
                                                  std::span<const CorrectionTask> tasks,
                                                  const Matrix& memory_template,
                                                  const Vector& context);
std::vector<CorrectionField> correct_batch_parallel(const StepsSolver& solver,
                                                    std::span<const CorrectionTask> tasks,
                                                    const Matrix& memory_template,
                                                    const Vector& context);

/// Threads OpenMP will use for the parallel kernels.
int max_threads();

}  // namespace kernels
}  // namespace steps
