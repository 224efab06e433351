#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "steps/backbones.hpp"
#include "steps/config.hpp"
#include "steps/dataset.hpp"
#include "steps/error_memory.hpp"
#include "steps/solver.hpp"

namespace steps {

/// Refuses to correct a window with a memory snapshot that already contains
/// any of that window's targets.
class LeakageGuard {
 public:
  /// Records that memory version `version` consumed targets up to
  /// `last_target_index` (inclusive).
  void record_update(std::int64_t version, std::int64_t last_target_index);
  /// Throws a contract error unless every update up to `memory_version`
  /// consumed only targets before `first_target_index`.
  void check(std::int64_t memory_version, std::int64_t first_target_index) const;

  /// Largest target index consumed by versions 1..v (-1 for v = 0).
  std::int64_t consumed_through(std::int64_t version) const;

 private:
  std::vector<std::int64_t> consumed_;  // prefix maxima, index = version - 1
};

/// Error memory plus its completion-ordered update queue.
class MemorySchedule {
 public:
  MemorySchedule(ErrorMemory memory, bool group_completed);

  const ErrorMemory& memory() const noexcept { return memory_; }
  const LeakageGuard& guard() const noexcept { return guard_; }

  /// Queues a window's full residual; applied once time reaches origin + H.
  void enqueue(std::int64_t origin, Matrix residual);
  /// Applies every queued window whose last target index is < `time`.
  void advance_to(std::int64_t time);
  /// Applies a residual immediately, whatever its completion time. Only for
  /// exercising the guard.
  void force_update(std::int64_t origin, const Matrix& residual);

 private:
  struct Pending {
    std::int64_t origin;
    Matrix residual;
  };
  ErrorMemory memory_;
  LeakageGuard guard_;
  std::deque<Pending> pending_;
  bool group_completed_;
};

/// Which part of the horizon feeds the boundary, and how.
struct ProtocolSpec {
  enum class Kind { kStandard, kContamination, kSparseBoundary, kSparseAnchor };
  Kind kind = Kind::kStandard;

  double contamination_ratio = 0.0;
  Vector sigma;  // per-channel training std (contamination)
  int sparse_points = 3;
  double anchor_ratio = 0.1;
  int anchor_support = 36;

  /// Extra 1-indexed inclusive evaluation ranges, reported by name.
  std::map<std::string, std::pair<int, int>> ranges;
};

const char* to_string(ProtocolSpec::Kind kind) noexcept;

/// Number of anchors the sparse-anchor protocol reveals: round(ratio * support).
int anchor_count(double ratio, int support);

/// Summed errors over a set of (step, channel) cells.
struct RangeSums {
  double sse_zero = 0.0;
  double sse_steps = 0.0;
  double sae_zero = 0.0;
  double sae_steps = 0.0;
  std::int64_t count = 0;

  void add(const RangeSums& other);
};

struct RangeMetrics {
  double mse_zero = 0.0;
  double mse_steps = 0.0;
  double mae_zero = 0.0;
  double mae_steps = 0.0;
  std::int64_t count = 0;

  static RangeMetrics from(const RangeSums& sums);
  /// (MSE_base - MSE_method) / MSE_base.
  double improvement() const noexcept;
};

struct WindowRecord {
  int index = 0;
  std::int64_t origin = 0;
  int prefix_length = 0;
  std::int64_t memory_version = 0;
  bool excluded = false;
  std::map<std::string, RangeSums> ranges;  // always holds "full"
};

struct EvalReport {
  std::vector<WindowRecord> windows;
  std::map<std::string, RangeMetrics> metrics;  // "full", "post_warmup", protocol ranges
  int excluded_windows = 0;
  double seconds = 0.0;
  nlohmann::json manifest;

  const RangeMetrics& at(const std::string& range) const;
  /// Aggregate of `range` over windows with index >= first_window.
  RangeMetrics aggregate(const std::string& range, int first_window = 0) const;
};

/// Debug hooks for contract tests.
struct RolloutHooks {
  int inject_leak_at_window = -1;  // feed this window's own residual to memory first
};

/// Chronological delayed-revelation rollout over the test split.
EvalReport rollout(const Forecaster& backbone, std::shared_ptr<const DecoderParams> decoder,
                   const Dataset& data, const RolloutConfig& config,
                   const ProtocolSpec& protocol = {}, const RolloutHooks& hooks = {});

/// Decoder training samples from a simulated rollout over `split` using the
/// same boundary, local solver and memory schedule as deployment.
std::vector<DecoderSample> collect_decoder_samples(const Forecaster& backbone, const Dataset& data,
                                                   const RolloutConfig& config,
                                                   Split split = Split::kValidation);

/// Backbone named by the config, fitted on the training split when needed.
ForecasterPtr make_backbone(const Dataset& data, const RolloutConfig& config);

/// Decoder trained on validation-split rollouts of `backbone`. The full
/// training trace goes to `trace` when given.
std::shared_ptr<const DecoderParams> fit_decoder(const Forecaster& backbone, const Dataset& data,
                                                 const RolloutConfig& config,
                                                 TrainingResult* trace = nullptr);

/// Split per the config, then standardize with training-split statistics.
Dataset prepare_dataset(Dataset raw, const RolloutConfig& config);

/// Per-channel training-split std of the (already standardized) data.
Vector training_sigma(const Dataset& data);

}  // namespace steps
