#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "steps/rollout.hpp"

namespace steps {

/// One tidy result line: which run, which evaluation range, its metrics.
struct ResultRow {
  std::string experiment;
  std::string variant;
  std::string parameter;
  std::string value;
  std::string range;
  RangeMetrics metrics;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  nlohmann::json summary;

  /// First row matching all four keys; throws when absent.
  const ResultRow& find(const std::string& variant, const std::string& value,
                        const std::string& range = "full") const;
};

/// Prefix outliers at each ratio, for full STEPS and the unbounded variant.
/// summary: degradation per variant (mean over nonzero ratios of
/// (MSE_r - MSE_0) / MSE_0) and whether zero-shot rows agree across ratios.
ExperimentResult protocol_contamination(const Forecaster& backbone,
                                        std::shared_ptr<const DecoderParams> decoder,
                                        const Dataset& data, const RolloutConfig& config,
                                        const std::vector<double>& ratios = {0.0, 0.01, 0.05, 0.1,
                                                                             0.2});

/// Only the first k steps revealed; near (4..27) and far (73..96) ranges.
ExperimentResult protocol_sparse_boundary(const Forecaster& backbone,
                                          std::shared_ptr<const DecoderParams> decoder,
                                          const Dataset& data, const RolloutConfig& config,
                                          int points = 3);

/// Random anchors inside the first 36 steps; evaluated on 37..60.
ExperimentResult protocol_sparse_anchor(const Forecaster& backbone,
                                        std::shared_ptr<const DecoderParams> decoder,
                                        const Dataset& data, const RolloutConfig& config,
                                        const std::vector<double>& ratios = {0.05, 0.1, 0.2});

/// Full STEPS and its four test-time ablations from one checkpoint.
ExperimentResult run_ablation(const Forecaster& backbone,
                              std::shared_ptr<const DecoderParams> decoder, const Dataset& data,
                              const RolloutConfig& config);

/// Sensitivity grids. A prefix value of 0 means the FFT estimate.
struct SweepGrid {
  std::vector<double> memory_decay{0.0, 0.5, 0.8, 0.92, 0.98};
  std::vector<double> smoothness{0.01, 0.05, 0.1, 0.5, 1.0, 5.0};
  std::vector<int> prefix{1, 2, 3, 5, 7, 0};
};

/// One rollout per grid point, each with its own memory. Grid points run
/// concurrently; results are ordered as the grid.
ExperimentResult run_sweep(const Forecaster& backbone, std::shared_ptr<const DecoderParams> decoder,
                           const Dataset& data, const RolloutConfig& config,
                           const SweepGrid& grid = {});

struct LatencyRow {
  int horizon = 0;
  std::string kernel;  // "serial" or "parallel"
  int batch = 0;
  int channels = 0;
  int prefix = 0;
  int repetitions = 0;
  double median_ms_batch = 0.0;
  double variance_ms2 = 0.0;
  double ms_per_window = 0.0;
  double windows_per_second = 0.0;
  std::int64_t parameters = 0;
  std::int64_t multiply_adds = 0;
};

struct LatencySpec {
  std::vector<int> horizons{96, 192, 336, 720};
  int batch = 48;
  int channels = 7;
  int prefix = 4;
  int repetitions = 10;
  std::uint64_t seed = 0;
};

/// Module-only cost of boundary build, local solve, decode, fuse and memory
/// update over synthetic windows. The backbone is not involved.
std::vector<LatencyRow> bench_latency(const SolverConfig& solver, const LatencySpec& spec);

}  // namespace steps
