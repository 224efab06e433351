#include "steps/rollout.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "steps/errors.hpp"
#include "steps/prefix_boundary.hpp"
#include "steps/rng.hpp"

namespace steps {

// --- leakage guard / schedule ------------------------------------------------

void LeakageGuard::record_update(std::int64_t version, std::int64_t last_target_index) {
  require(version == static_cast<std::int64_t>(consumed_.size()) + 1, ErrorKind::kContract,
          "memory versions must be recorded in order");
  const std::int64_t prev = consumed_.empty() ? -1 : consumed_.back();
  consumed_.push_back(std::max(prev, last_target_index));
}

std::int64_t LeakageGuard::consumed_through(std::int64_t version) const {
  if (version <= 0) return -1;
  require(version <= static_cast<std::int64_t>(consumed_.size()), ErrorKind::kContract,
          "unknown memory version " + std::to_string(version));
  return consumed_[static_cast<std::size_t>(version - 1)];
}

void LeakageGuard::check(std::int64_t memory_version, std::int64_t first_target_index) const {
  const std::int64_t consumed = consumed_through(memory_version);
  require(consumed < first_target_index, ErrorKind::kContract,
          "leakage guard: memory version " + std::to_string(memory_version) +
              " consumed target index " + std::to_string(consumed) +
              " but the window being corrected starts at " + std::to_string(first_target_index));
}

MemorySchedule::MemorySchedule(ErrorMemory memory, bool group_completed)
    : memory_(std::move(memory)), group_completed_(group_completed) {}

void MemorySchedule::enqueue(std::int64_t origin, Matrix residual) {
  pending_.push_back({origin, std::move(residual)});
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const Pending& a, const Pending& b) { return a.origin < b.origin; });
}

void MemorySchedule::advance_to(std::int64_t time) {
  const std::int64_t horizon = memory_.horizon();
  std::vector<Matrix> batch;
  std::int64_t last_index = -1;
  while (!pending_.empty() && pending_.front().origin + horizon <= time) {
    Pending p = std::move(pending_.front());
    pending_.pop_front();
    const std::int64_t last = p.origin + horizon - 1;
    if (group_completed_) {
      batch.push_back(std::move(p.residual));
      last_index = std::max(last_index, last);
    } else {
      memory_.update(p.residual);
      guard_.record_update(memory_.version(), last);
    }
  }
  if (!batch.empty()) {
    memory_.update(batch);
    guard_.record_update(memory_.version(), last_index);
  }
}

void MemorySchedule::force_update(std::int64_t origin, const Matrix& residual) {
  memory_.update(residual);
  guard_.record_update(memory_.version(), origin + memory_.horizon() - 1);
}

// --- protocol helpers ----------------------------------------------------------

const char* to_string(ProtocolSpec::Kind kind) noexcept {
  switch (kind) {
    case ProtocolSpec::Kind::kStandard: return "standard";
    case ProtocolSpec::Kind::kContamination: return "contamination";
    case ProtocolSpec::Kind::kSparseBoundary: return "sparse-boundary";
    case ProtocolSpec::Kind::kSparseAnchor: return "sparse-anchor";
  }
  return "unknown";
}

int anchor_count(double ratio, int support) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorKind::kInvalidArgument,
          "anchor ratio must lie in [0,1]");
  return static_cast<int>(std::floor(ratio * support + 0.5 + 1e-9));
}

void RangeSums::add(const RangeSums& other) {
  sse_zero += other.sse_zero;
  sse_steps += other.sse_steps;
  sae_zero += other.sae_zero;
  sae_steps += other.sae_steps;
  count += other.count;
}

RangeMetrics RangeMetrics::from(const RangeSums& s) {
  RangeMetrics m;
  m.count = s.count;
  if (s.count == 0) return m;
  const double n = static_cast<double>(s.count);
  m.mse_zero = s.sse_zero / n;
  m.mse_steps = s.sse_steps / n;
  m.mae_zero = s.sae_zero / n;
  m.mae_steps = s.sae_steps / n;
  return m;
}

double RangeMetrics::improvement() const noexcept {
  return mse_zero > 0.0 ? (mse_zero - mse_steps) / mse_zero : 0.0;
}

const RangeMetrics& EvalReport::at(const std::string& range) const {
  const auto it = metrics.find(range);
  require(it != metrics.end(), ErrorKind::kInvalidArgument, "report has no range '" + range + "'");
  return it->second;
}

RangeMetrics EvalReport::aggregate(const std::string& range, int first_window) const {
  RangeSums total;
  for (const auto& w : windows) {
    if (w.excluded || w.index < first_window) continue;
    if (const auto it = w.ranges.find(range); it != w.ranges.end()) total.add(it->second);
  }
  return RangeMetrics::from(total);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::int64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(salt) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int standard_prefix_length(const Matrix& lookback, const RolloutConfig& config) {
  const int horizon = config.horizon;
  if (config.fixed_prefix) return std::min(*config.fixed_prefix, horizon);
  const int support = config.solver.min_prefix_support;
  const int period = estimate_dominant_period(lookback, support);
  return select_prefix_length(period, horizon, horizon, support);
}

PrefixBoundary make_boundary(const ProtocolSpec& protocol, const RolloutConfig& config,
                             const SeriesWindow& window, const Matrix& forecast,
                             std::uint64_t window_seed) {
  switch (protocol.kind) {
    case ProtocolSpec::Kind::kStandard: {
      const int a = standard_prefix_length(window.lookback, config);
      return build_boundary(window.target.topRows(a), forecast);
    }
    case ProtocolSpec::Kind::kContamination: {
      const int a = standard_prefix_length(window.lookback, config);
      const PrefixBoundary clean = build_boundary(window.target.topRows(a), forecast);
      return contaminate_prefix(clean, forecast, protocol.contamination_ratio, protocol.sigma,
                                window_seed);
    }
    case ProtocolSpec::Kind::kSparseBoundary: {
      const int k = protocol.sparse_points;
      require(k >= 0 && k < config.horizon, ErrorKind::kInvalidArgument,
              "sparse boundary needs 0 <= k < H");
      return build_boundary(window.target.topRows(k), forecast);
    }
    case ProtocolSpec::Kind::kSparseAnchor: {
      const int support = protocol.anchor_support;
      require(support >= 1 && support <= config.horizon, ErrorKind::kInvalidArgument,
              "anchor support must lie in [1, H]");
      const int count = anchor_count(protocol.anchor_ratio, support);
      std::vector<int> rows(support);
      std::iota(rows.begin(), rows.end(), 0);
      Rng rng(window_seed);
      for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(support - i)));
        std::swap(rows[i], rows[j]);
      }
      rows.resize(count);
      std::sort(rows.begin(), rows.end());
      return build_anchor_boundary(window.target, forecast, support, rows);
    }
  }
  fail(ErrorKind::kInvalidArgument, "unknown protocol");
}

SeriesWindow window_at(const Dataset& data, std::int64_t origin, int lookback, int horizon) {
  SeriesWindow w;
  w.origin = origin;
  w.lookback = data.values.middleRows(origin - lookback, lookback);
  w.target = data.values.middleRows(origin, horizon);
  return w;
}

RangeSums range_sums(const Matrix& truth, const Matrix& zero_shot, const Matrix& corrected,
                     int first, int last) {
  RangeSums s;
  const int rows = last - first + 1;
  const auto e0 = (truth.middleRows(first - 1, rows) - zero_shot.middleRows(first - 1, rows)).array();
  const auto e1 = (truth.middleRows(first - 1, rows) - corrected.middleRows(first - 1, rows)).array();
  s.sse_zero = e0.square().sum();
  s.sse_steps = e1.square().sum();
  s.sae_zero = e0.abs().sum();
  s.sae_steps = e1.abs().sum();
  s.count = static_cast<std::int64_t>(rows) * truth.cols();
  return s;
}

void check_backbone(const Forecaster& backbone, const Dataset& data, const RolloutConfig& config) {
  require(backbone.lookback() == config.lookback && backbone.horizon() == config.horizon &&
              backbone.channels() == data.channels(),
          ErrorKind::kConfig,
          "backbone was built for L=" + std::to_string(backbone.lookback()) +
              " H=" + std::to_string(backbone.horizon()) + " d=" + std::to_string(backbone.channels()) +
              ", run uses L=" + std::to_string(config.lookback) + " H=" +
              std::to_string(config.horizon) + " d=" + std::to_string(data.channels()));
}

}  // namespace

EvalReport rollout(const Forecaster& backbone, std::shared_ptr<const DecoderParams> decoder,
                   const Dataset& data, const RolloutConfig& config, const ProtocolSpec& protocol,
                   const RolloutHooks& hooks) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  check_split_fits(data, config.lookback, config.horizon);
  check_backbone(backbone, data, config);
  const int horizon = config.horizon;

  std::map<std::string, std::pair<int, int>> ranges = protocol.ranges;
  ranges["full"] = {1, horizon};
  for (const auto& [name, r] : ranges) {
    require(r.first >= 1 && r.first <= r.second && r.second <= horizon, ErrorKind::kConfig,
            "evaluation range '" + name + "' lies outside 1..H");
  }
  if (protocol.kind == ProtocolSpec::Kind::kContamination) {
    require(protocol.sigma.size() == data.channels(), ErrorKind::kConfig,
            "contamination needs one sigma per channel");
  }

  const StepsSolver solver(config.solver, decoder);
  const std::uint64_t backbone_digest = backbone.digest();
  const std::uint64_t decoder_digest = decoder ? decoder->digest() : 0;

  MemorySchedule schedule(ErrorMemory(horizon, data.channels(), config.solver.context_size,
                                      config.solver.memory_decay),
                          config.group_completed);

  EvalReport report;
  const auto origins =
      window_origins(data, Split::kTest, config.lookback, horizon, config.effective_stride());
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const std::int64_t origin = origins[i];
    schedule.advance_to(origin);

    const SeriesWindow window = window_at(data, origin, config.lookback, horizon);
    const Matrix forecast = backbone.predict(window);

    WindowRecord record;
    record.index = static_cast<int>(i);
    record.origin = origin;
    if (!forecast.allFinite()) {
      record.excluded = true;
      ++report.excluded_windows;
      report.windows.push_back(std::move(record));
      continue;
    }
    if (hooks.inject_leak_at_window == static_cast<int>(i)) {
      schedule.force_update(origin, window.target - forecast);
    }

    const PrefixBoundary boundary =
        make_boundary(protocol, config, window, forecast, mix_seed(config.seed, origin));
    const ErrorMemory& memory = schedule.memory();
    schedule.guard().check(memory.version(), origin);
    const CorrectionField field =
        solver.correct(forecast, boundary, memory.error_template(), memory.context_vector());

    record.prefix_length = boundary.length;
    record.memory_version = memory.version();
    if (!field.corrected.allFinite()) {
      record.excluded = true;
      ++report.excluded_windows;
    } else {
      for (const auto& [name, r] : ranges) {
        record.ranges[name] = range_sums(window.target, forecast, field.corrected, r.first, r.second);
      }
    }
    report.windows.push_back(std::move(record));
    schedule.enqueue(origin, window.target - forecast);
  }

  require(backbone.digest() == backbone_digest, ErrorKind::kContract,
          "frozen backbone parameters changed during the rollout");
  require(!decoder || decoder->digest() == decoder_digest, ErrorKind::kContract,
          "frozen decoder parameters changed during the rollout");

  for (const auto& [name, r] : ranges) report.metrics[name] = report.aggregate(name);
  report.metrics["post_warmup"] = report.aggregate("full", config.warmup_windows);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.manifest = {{"config", to_json(config)},
                     {"protocol", to_string(protocol.kind)},
                     {"dataset", data.name},
                     {"channels", data.channels()},
                     {"windows", report.windows.size()},
                     {"excluded_windows", report.excluded_windows},
                     {"decoder", decoder != nullptr},
                     {"backbone_kind", to_string(backbone.kind())}};
  if (protocol.kind == ProtocolSpec::Kind::kContamination) {
    report.manifest["contamination_ratio"] = protocol.contamination_ratio;
  } else if (protocol.kind == ProtocolSpec::Kind::kSparseBoundary) {
    report.manifest["sparse_points"] = protocol.sparse_points;
  } else if (protocol.kind == ProtocolSpec::Kind::kSparseAnchor) {
    report.manifest["anchor_ratio"] = protocol.anchor_ratio;
    report.manifest["anchor_support"] = protocol.anchor_support;
    report.manifest["anchor_count"] = anchor_count(protocol.anchor_ratio, protocol.anchor_support);
  }
  return report;
}

std::vector<DecoderSample> collect_decoder_samples(const Forecaster& backbone, const Dataset& data,
                                                   const RolloutConfig& config, Split split) {
  config.validate();
  check_backbone(backbone, data, config);
  const int horizon = config.horizon;
  SolverConfig solver_config = config.solver;
  solver_config.ablation = {};
  const StepsSolver solver(solver_config, nullptr);

  MemorySchedule schedule(ErrorMemory(horizon, data.channels(), config.solver.context_size,
                                      config.solver.memory_decay),
                          config.group_completed);
  std::vector<DecoderSample> samples;
  const auto origins =
      window_origins(data, split, config.lookback, horizon, config.effective_train_stride());
  for (const std::int64_t origin : origins) {
    schedule.advance_to(origin);
    const SeriesWindow window = window_at(data, origin, config.lookback, horizon);
    const Matrix forecast = backbone.predict(window);
    if (!forecast.allFinite()) continue;
    const PrefixBoundary boundary = make_boundary({}, config, window, forecast, 0);
    const ErrorMemory& memory = schedule.memory();
    schedule.guard().check(memory.version(), origin);
    const LocalCorrection local = solve_local(boundary, solver_config.local);

    DecoderSample sample;
    sample.short_response = local.short_response;
    sample.features = solver.features(forecast, local.short_response, boundary,
                                      memory.error_template(), memory.context_vector());
    sample.residual = window.target - forecast;
    samples.push_back(std::move(sample));
    schedule.enqueue(origin, window.target - forecast);
  }
  return samples;
}

ForecasterPtr make_backbone(const Dataset& data, const RolloutConfig& config) {
  const int d = data.channels();
  ForecasterPtr model;
  switch (backbone_kind_from_string(config.backbone)) {
    case BackboneKind::kLinear:
      model = fit_linear_backbone(data.values.topRows(data.split.train_end), config.lookback,
                                  config.horizon, config.backbone_ridge);
      break;
    case BackboneKind::kNaiveLast:
      model = std::make_shared<const NaiveLastForecaster>(config.lookback, config.horizon, d);
      break;
    case BackboneKind::kSeasonalNaive:
      model = std::make_shared<const SeasonalNaiveForecaster>(config.lookback, config.horizon, d,
                                                              config.seasonal_period);
      break;
    case BackboneKind::kOracleWithBias:
      model = OracleBiasForecaster::constant(config.lookback, config.horizon, d, config.oracle_bias);
      break;
  }
  if (config.normalize) model = wrap_normalization(model, true);
  return model;
}

std::shared_ptr<const DecoderParams> fit_decoder(const Forecaster& backbone, const Dataset& data,
                                                 const RolloutConfig& config,
                                                 TrainingResult* trace) {
  const auto samples = collect_decoder_samples(backbone, data, config, Split::kValidation);
  require(!samples.empty(), ErrorKind::kData,
          "validation split yields no decoder training windows; enlarge it or shrink L/H");
  TrainingResult result =
      train_decoder(samples, config.solver.context_size, config.effective_trainer());
  auto params = std::make_shared<const DecoderParams>(result.params);
  if (trace) *trace = std::move(result);
  return params;
}

Dataset prepare_dataset(Dataset raw, const RolloutConfig& config) {
  return standardize(apply_split(std::move(raw), config));
}

Vector training_sigma(const Dataset& data) {
  require(data.split.train_end >= 2, ErrorKind::kData, "training split too small for sigma");
  const auto train = data.values.topRows(data.split.train_end);
  const Eigen::RowVectorXd mean = train.colwise().mean();
  return ((train.rowwise() - mean).array().square().colwise().sum() /
          static_cast<double>(train.rows() - 1))
      .sqrt()
      .transpose();
}

}  // namespace steps
