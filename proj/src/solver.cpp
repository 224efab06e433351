#include "steps/solver.hpp"

#include <cmath>
#include <string>

#include "steps/errors.hpp"

namespace steps {

void SolverConfig::validate() const {
  require(min_prefix_support >= 1, ErrorKind::kConfig, "minimum prefix support must be >= 1");
  local.validate();
  require(context_size >= 1, ErrorKind::kConfig, "context size must be >= 1");
  require(hidden >= 1, ErrorKind::kConfig, "hidden dimension must be >= 1");
  require(memory_decay >= 0.0 && memory_decay <= 1.0, ErrorKind::kConfig,
          "memory decay must lie in [0,1]");
  require(std::isfinite(output_scale), ErrorKind::kConfig, "global response scale must be finite");
  fusion.validate();
}

FusionSchedule SolverConfig::effective_fusion() const {
  FusionSchedule schedule = fusion;
  if (ablation.local_only) schedule.global_mix = 0.0;
  if (ablation.no_bound) schedule.clip = FusionSchedule::kUnbounded;
  return schedule;
}

StepsSolver::StepsSolver(SolverConfig config, std::shared_ptr<const DecoderParams> decoder)
    : config_(std::move(config)), decoder_(std::move(decoder)) {
  config_.validate();
  if (decoder_) {
    decoder_->validate();
    require(decoder_->context_size == config_.context_size, ErrorKind::kConfig,
            "decoder context size " + std::to_string(decoder_->context_size) +
                " differs from the solver's " + std::to_string(config_.context_size));
  }
}

Matrix StepsSolver::features(const Matrix& forecast, const Matrix& short_response,
                             const PrefixBoundary& boundary, const Matrix& memory_template,
                             const Vector& context) const {
  const Matrix zero_memory = Matrix::Zero(forecast.rows(), forecast.cols());
  const Matrix& memory = config_.ablation.no_memory ? zero_memory : memory_template;
  return build_features({forecast, short_response, boundary.padded_error, boundary.mask, memory,
                         context});
}

CorrectionField StepsSolver::correct(const Matrix& forecast, const PrefixBoundary& boundary,
                                     const Matrix& memory_template, const Vector& context) const {
  const Eigen::Index horizon = forecast.rows();
  const Eigen::Index d = forecast.cols();
  require(boundary.horizon() == horizon && boundary.channels() == d, ErrorKind::kDimension,
          "boundary does not match the forecast shape");

  CorrectionField out;
  if (boundary.empty()) {
    // Nothing revealed: pure zero-shot window.
    out.local = solve_local(boundary, config_.local);
    out.short_response = Matrix::Zero(horizon, d);
    out.long_response = Matrix::Zero(horizon, d);
    out.delta = Matrix::Zero(horizon, d);
    out.corrected = forecast;
    return out;
  }

  out.local = solve_local(boundary, config_.local);
  out.short_response =
      config_.ablation.global_only ? Matrix::Zero(horizon, d) : out.local.short_response;

  const FusionSchedule schedule = config_.effective_fusion();
  if (decoder_ && schedule.global_mix > 0.0) {
    out.long_response = decode_features(
        *decoder_, features(forecast, out.short_response, boundary, memory_template, context));
  } else {
    out.long_response = Matrix::Zero(horizon, d);
  }
  out.delta = fuse(out.short_response, out.long_response, schedule);
  out.corrected = apply_correction(forecast, out.delta);
  return out;
}

}  // namespace steps
