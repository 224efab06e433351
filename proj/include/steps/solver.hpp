#pragma once

#include <memory>

#include "steps/error_memory.hpp"
#include "steps/fusion.hpp"
#include "steps/local_solver.hpp"
#include "steps/memory_decoder.hpp"
#include "steps/prefix_boundary.hpp"

namespace steps {

/// Test-time switches; every flag removes one term of the fused response
/// without retraining anything.
struct AblationFlags {
  bool local_only = false;   // gamma = 0
  bool global_only = false;  // Delta_short = 0
  bool no_bound = false;     // c = +inf
  bool no_memory = false;    // M frozen at 0

  bool any() const noexcept { return local_only || global_only || no_bound || no_memory; }
};

/// Every solver hyperparameter with its default.
struct SolverConfig {
  int min_prefix_support = 2;
  LocalSolverConfig local;
  int context_size = 8;
  int hidden = 256;
  double memory_decay = 0.5;
  double output_scale = 1.5;
  FusionSchedule fusion;
  AblationFlags ablation;

  void validate() const;
  /// Fusion schedule after applying local_only / no_bound.
  FusionSchedule effective_fusion() const;
};

/// The three horizon-length fields of one corrected window.
struct CorrectionField {
  LocalCorrection local;
  Matrix short_response;  // as fused (zero under global_only)
  Matrix long_response;
  Matrix delta;
  Matrix corrected;
};

/// Per-window STEPS correction: local solve, decoder, fusion. Stateless; the
/// caller supplies the memory snapshot that predates the window.
class StepsSolver {
 public:
  /// `decoder` may be null, which disables the global branch.
  StepsSolver(SolverConfig config, std::shared_ptr<const DecoderParams> decoder);

  const SolverConfig& config() const noexcept { return config_; }
  const DecoderParams* decoder() const noexcept { return decoder_.get(); }

  CorrectionField correct(const Matrix& forecast, const PrefixBoundary& boundary,
                          const Matrix& memory_template, const Vector& context) const;

  /// Decoder features for a window, as used both here and when building
  /// decoder training samples.
  Matrix features(const Matrix& forecast, const Matrix& short_response,
                  const PrefixBoundary& boundary, const Matrix& memory_template,
                  const Vector& context) const;

 private:
  SolverConfig config_;
  std::shared_ptr<const DecoderParams> decoder_;
};

}  // namespace steps
