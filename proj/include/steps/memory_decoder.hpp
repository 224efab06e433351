#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "steps/fusion.hpp"
#include "steps/param_file.hpp"
#include "steps/types.hpp"

namespace steps {

// Per-channel feature column: [forecast | short response | padded error |
// mask | memory template | context], widths H,H,H,H,H,2K. The id is stored
// in parameter files so a layout change cannot be loaded silently.
inline constexpr int kFeatureLayoutId = 1;

/// Parameters of the global decoder g_phi: one tanh hidden layer shared by
/// all channels, Delta_long = scale * (W2 tanh(W1 f + b1) + b2).
struct DecoderParams {
  int horizon = 0;
  int context_size = 0;
  int hidden = 0;
  double output_scale = 1.5;
  std::uint64_t seed = 0;

  Matrix w1;  // hidden x input_width
  Vector b1;  // hidden
  Matrix w2;  // H x hidden
  Vector b2;  // H

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  static DecoderParams initialize(int horizon, int context_size, int hidden, double output_scale,
                                  std::uint64_t seed);
  static DecoderParams zeros(int horizon, int context_size, int hidden, double output_scale);

  int input_width() const noexcept { return 5 * horizon + 2 * context_size; }
  std::size_t parameter_count() const noexcept;
  /// Multiply-adds of one forward pass for one channel.
  std::size_t multiply_adds() const noexcept;
  std::uint64_t digest() const;
  void validate() const;

  ParamFile to_param_file() const;
  static DecoderParams from_param_file(const ParamFile& file);
};

/// Inputs of one decode call; all H x d fields share H and d.
struct DecoderInputs {
  const Matrix& forecast;
  const Matrix& short_response;
  const Matrix& padded_error;
  const Vector& mask;
  const Matrix& memory;
  const Vector& context;
};

/// input_width x d feature matrix, one column per channel.
Matrix build_features(const DecoderInputs& inputs);

/// Delta_long, H x d. Pure; NaN inputs are rejected.
Matrix decode(const DecoderParams& params, const DecoderInputs& inputs);

/// Forward pass on prepared feature columns (input_width x N) -> H x N.
Matrix decode_features(const DecoderParams& params, const Matrix& features);

/// One training window: features per channel plus what fusion needs.
struct DecoderSample {
  Matrix features;        // input_width x d
  Matrix short_response;  // H x d
  Matrix residual;        // H x d, full-horizon Y - Yhat
};

struct DecoderGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  double squared_norm() const;
  void scale(double factor);
};

/// Mean squared error of (short + gamma q(h) long) against the residual over
/// every (step, channel, sample). Fills `gradients` when non-null.
double decoder_loss(const DecoderParams& params, std::span<const DecoderSample> samples,
                    const FusionSchedule& schedule, DecoderGradients* gradients = nullptr);

struct TrainerConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  double gradient_clip = 1.0;
  int epochs = 5;
  int max_batches = 16;
  int batch_windows = 16;
  int hidden = 256;
  double output_scale = 1.5;
  std::uint64_t seed = 0;
  FusionSchedule schedule;
};

struct TrainingResult {
  DecoderParams params;
  std::vector<double> step_loss;   // per optimizer step
  std::vector<double> epoch_loss;  // mean step loss per epoch
  double initial_loss = 0.0;       // over all used batches, before training
  double final_loss = 0.0;
  int batches_used = 0;
};

/// AdamW with decoupled weight decay and global gradient-norm clipping.
/// Throws on an empty training set or a non-finite loss.
TrainingResult train_decoder(std::span<const DecoderSample> samples, int context_size,
                             const TrainerConfig& config);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
};

/// Central finite differences (step 1e-4) on up to 200 parameters drawn
/// from every block, compared against the analytic gradients. `corrupt`
/// may perturb the analytic gradients first (mutation testing).
GradientCheckResult gradient_check(const DecoderParams& params, const DecoderSample& sample,
                                   const FusionSchedule& schedule, std::uint64_t seed,
                                   const std::function<void(DecoderGradients&)>& corrupt = {});

}  // namespace steps
