#pragma once

#include <cstdint>
#include <deque>
#include <span>

#include "steps/param_file.hpp"
#include "steps/types.hpp"

namespace steps {

/// Per-window residual summary kept in the context ring.
struct WindowSummary {
  double mean = 0.0;
  double mean_abs = 0.0;
};

/// Global error memory: an EMA template of full-horizon residuals over
/// completed windows plus a ring of the last K window summaries.
///
/// The rollout loop is the only writer. Readers take a copy (snapshot) per
/// window.
class ErrorMemory {
 public:
  ErrorMemory(int horizon, int channels, int context_size = 8, double decay = 0.5);

  int horizon() const noexcept { return static_cast<int>(template_.rows()); }
  int channels() const noexcept { return static_cast<int>(template_.cols()); }
  int context_size() const noexcept { return context_size_; }
  double decay() const noexcept { return decay_; }

  /// M_t, H x d.
  const Matrix& error_template() const noexcept { return template_; }
  /// Number of applied (non-empty) updates.
  std::int64_t version() const noexcept { return version_; }
  /// Updates that were skipped because the batch was empty.
  std::int64_t empty_updates() const noexcept { return empty_updates_; }
  const std::deque<WindowSummary>& context_ring() const noexcept { return ring_; }

  /// M_t = rho M_{t-1} + (1 - rho) mean(batch). Every residual must be H x d
  /// and belong to a window whose whole horizon has been observed.
  void update(std::span<const Matrix> batch_residuals);
  void update(const Matrix& residual) { update(std::span<const Matrix>(&residual, 1)); }

  /// z_t: (mean, mean-abs) per ring slot, oldest first, zero padded to 2K.
  Vector context_vector() const;

  ParamFile to_param_file() const;
  static ErrorMemory from_param_file(const ParamFile& file);

 private:
  int context_size_;
  double decay_;
  Matrix template_;
  std::deque<WindowSummary> ring_;
  std::int64_t version_ = 0;
  std::int64_t empty_updates_ = 0;
};

}  // namespace steps
