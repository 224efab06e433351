#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "steps/backbones.hpp"
#include "steps/dataset.hpp"
#include "steps/memory_decoder.hpp"
#include "steps/solver.hpp"

namespace steps {

/// Everything one harness run needs besides the data and checkpoints.
struct RolloutConfig {
  int lookback = 96;
  int horizon = 96;
  int stride = 0;        // 0 = H (non-overlapping evaluation windows)
  int train_stride = 0;  // 0 = max(1, H / 8), decoder-training rollouts
  std::optional<int> fixed_prefix;  // unset = FFT period estimate
  bool group_completed = false;     // one memory batch per flush instead of per window
  int warmup_windows = 0;           // excluded from the "post_warmup" aggregate
  std::uint64_t seed = 0;

  SolverConfig solver;
  TrainerConfig trainer;

  std::string backbone = "linear";
  double backbone_ridge = 1.0;
  int seasonal_period = 24;
  double oracle_bias = 0.3;
  bool normalize = false;

  std::string split = "0.7,0.1,0.2";  // ratios, "ett-hourly" or "ett-minute"
  MissingPolicy missing_policy = MissingPolicy::kDropRow;

  int effective_stride() const noexcept { return stride > 0 ? stride : horizon; }
  int effective_train_stride() const noexcept {
    return train_stride > 0 ? train_stride : std::max(1, horizon / 8);
  }
  /// Trainer settings with the solver's fusion schedule and seed applied.
  TrainerConfig effective_trainer() const;

  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and
/// malformed values are config errors.
std::map<std::string, std::string> parse_key_values(const std::string& text);
void apply_setting(RolloutConfig& config, const std::string& key, const std::string& value);
RolloutConfig load_config_file(const std::filesystem::path& path, RolloutConfig base = {});

/// Flat record of every effective setting (run manifest).
nlohmann::json to_json(const RolloutConfig& config);

/// Applies the configured split to a dataset.
Dataset apply_split(Dataset data, const RolloutConfig& config);

}  // namespace steps
