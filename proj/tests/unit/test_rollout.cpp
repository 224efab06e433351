#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include "steps/errors.hpp"
#include "steps/protocols.hpp"
#include "steps/rollout.hpp"
#include "steps/synthetic.hpp"
#include "test_util.hpp"

namespace {

using namespace steps;

Dataset stream(Eigen::Index length, int channels = 2, double noise = 0.1, std::uint64_t seed = 7) {
  SeasonalStreamSpec spec;
  spec.length = length;
  spec.channels = channels;
  spec.noise = noise;
  spec.seed = seed;
  return make_seasonal_stream(spec);
}

RolloutConfig small_config(int lookback = 48, int horizon = 24) {
  RolloutConfig c;
  c.lookback = lookback;
  c.horizon = horizon;
  c.solver.hidden = 16;
  c.trainer.epochs = 2;
  c.trainer.max_batches = 4;
  return c;
}

void expect_contract(const std::function<void()>& body) {
  try {
    body();
    FAIL() << "expected a contract violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract) << e.what();
  }
}

// --- leakage guard / memory schedule -------------------------------------------

TEST(LeakageGuard, TracksPrefixMaxima) {
  LeakageGuard g;
  EXPECT_EQ(g.consumed_through(0), -1);
  g.record_update(1, 23);
  g.record_update(2, 10);  // an older window completing late
  g.record_update(3, 47);
  EXPECT_EQ(g.consumed_through(1), 23);
  EXPECT_EQ(g.consumed_through(2), 23);
  EXPECT_EQ(g.consumed_through(3), 47);
  g.check(0, 0);
  g.check(2, 24);
  expect_contract([&] { g.check(2, 23); });
  expect_contract([&] { g.check(3, 40); });
}

TEST(LeakageGuard, VersionsMustArriveInOrder) {
  LeakageGuard g;
  expect_contract([&] { g.record_update(2, 5); });
  g.record_update(1, 5);
  expect_contract([&] { g.record_update(1, 6); });
  expect_contract([&] { g.check(2, 100); });
}

TEST(MemorySchedule, AppliesOnlyCompletedWindows) {
  MemorySchedule s(ErrorMemory(4, 1, 2, 0.0), false);
  s.enqueue(10, Matrix::Constant(4, 1, 1.0));
  s.enqueue(12, Matrix::Constant(4, 1, 3.0));
  s.advance_to(13);  // window 10 covers 10..13, still open at 13
  EXPECT_EQ(s.memory().version(), 0);
  s.advance_to(14);
  EXPECT_EQ(s.memory().version(), 1);
  EXPECT_EQ(s.memory().error_template()(0, 0), 1.0);
  EXPECT_EQ(s.guard().consumed_through(1), 13);
  s.advance_to(100);
  EXPECT_EQ(s.memory().version(), 2);
  EXPECT_EQ(s.memory().error_template()(0, 0), 3.0);
  EXPECT_EQ(s.guard().consumed_through(2), 15);
}

TEST(MemorySchedule, GroupedFlushIsOneUpdate) {
  MemorySchedule s(ErrorMemory(4, 1, 2, 0.0), true);
  s.enqueue(12, Matrix::Constant(4, 1, 3.0));
  s.enqueue(10, Matrix::Constant(4, 1, 1.0));
  s.advance_to(100);
  EXPECT_EQ(s.memory().version(), 1);
  EXPECT_EQ(s.memory().error_template()(0, 0), 2.0);
  EXPECT_EQ(s.guard().consumed_through(1), 15);
}

TEST(MemorySchedule, ForcedUpdateTripsTheGuard) {
  MemorySchedule s(ErrorMemory(4, 1, 2, 0.5), false);
  s.force_update(20, Matrix::Ones(4, 1));
  expect_contract([&] { s.guard().check(s.memory().version(), 20); });
}

TEST(AnchorCount, MatchesGrid) {
  EXPECT_EQ(anchor_count(0.05, 36), 2);
  EXPECT_EQ(anchor_count(0.10, 36), 4);
  EXPECT_EQ(anchor_count(0.20, 36), 7);
  EXPECT_EQ(anchor_count(0.01, 36), 0);
  EXPECT_EQ(anchor_count(1.0, 36), 36);
  EXPECT_THROW(anchor_count(1.5, 36), Error);
}

// --- rollout ------------------------------------------------------------------

// Emits NaN for every third window and otherwise repeats the last value.
class FlakyForecaster final : public Forecaster {
 public:
  using Forecaster::Forecaster;
  BackboneKind kind() const noexcept override { return BackboneKind::kNaiveLast; }
  std::uint64_t digest() const override { return 0; }
  ParamFile to_param_file() const override { return base_param_file(); }

 protected:
  Matrix predict_checked(const SeriesWindow& w) const override {
    Matrix out = w.lookback.bottomRows(1).replicate(horizon(), 1);
    if (calls_++ % 3 == 1) out(0, 0) = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

 private:
  mutable int calls_ = 0;
};

// Parameters that change while the rollout runs.
class DriftingForecaster final : public Forecaster {
 public:
  using Forecaster::Forecaster;
  BackboneKind kind() const noexcept override { return BackboneKind::kNaiveLast; }
  std::uint64_t digest() const override { return static_cast<std::uint64_t>(calls_); }
  ParamFile to_param_file() const override { return base_param_file(); }

 protected:
  Matrix predict_checked(const SeriesWindow& w) const override {
    ++calls_;
    return w.lookback.bottomRows(1).replicate(horizon(), 1);
  }

 private:
  mutable int calls_ = 0;
};

class RolloutTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config = small_config();
    data = prepare_dataset(stream(4000), config);
    backbone = OracleBiasForecaster::constant(config.lookback, config.horizon, 2, 0.3);
  }
  RolloutConfig config;
  Dataset data;
  ForecasterPtr backbone;
};

TEST_F(RolloutTest, AllAblationsGiveZeroShotExactly) {
  const auto decoder = fit_decoder(*backbone, data, config);
  RolloutConfig c = config;
  c.solver.ablation.local_only = true;
  c.solver.ablation.global_only = true;
  const EvalReport r = rollout(*backbone, decoder, data, c);
  EXPECT_GT(r.windows.size(), 10u);
  EXPECT_EQ(r.at("full").mse_steps, r.at("full").mse_zero);
  EXPECT_EQ(r.at("full").mae_steps, r.at("full").mae_zero);
}

TEST_F(RolloutTest, CorrectsConstantBias) {
  const auto decoder = fit_decoder(*backbone, data, config);
  const EvalReport r = rollout(*backbone, decoder, data, config);
  EXPECT_NEAR(r.at("full").mse_zero, 0.09, 1e-12);
  EXPECT_LT(r.at("full").mse_steps, r.at("full").mse_zero);
  EXPECT_EQ(r.excluded_windows, 0);
}

TEST_F(RolloutTest, Deterministic) {
  const auto d1 = fit_decoder(*backbone, data, config);
  const auto d2 = fit_decoder(*backbone, data, config);
  EXPECT_EQ(d1->digest(), d2->digest());
  const EvalReport a = rollout(*backbone, d1, data, config);
  const EvalReport b = rollout(*backbone, d2, data, config);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    EXPECT_EQ(a.windows[i].ranges.at("full").sse_steps, b.windows[i].ranges.at("full").sse_steps);
  }
  EXPECT_EQ(a.at("full").mse_steps, b.at("full").mse_steps);
}

TEST_F(RolloutTest, MemoryVersionLagsByOneWindow) {
  const EvalReport r = rollout(*backbone, nullptr, data, config);
  for (const auto& w : r.windows) EXPECT_EQ(w.memory_version, w.index);
}

TEST_F(RolloutTest, OverlappingWindowsWaitForCompletion) {
  RolloutConfig c = config;
  c.stride = 6;
  const EvalReport r = rollout(*backbone, nullptr, data, c);
  for (const auto& w : r.windows) {
    // windows 0..i-4 have closed by origin i (24 / 6 = 4 strides)
    EXPECT_EQ(w.memory_version, std::max(0, w.index - 3));
  }
}

TEST_F(RolloutTest, InjectedLeakIsAContractViolation) {
  RolloutHooks hooks;
  hooks.inject_leak_at_window = 3;
  expect_contract([&] { rollout(*backbone, nullptr, data, config, {}, hooks); });
}

TEST_F(RolloutTest, ChangingBackboneIsAContractViolation) {
  const DriftingForecaster drifting(config.lookback, config.horizon, 2);
  expect_contract([&] { rollout(drifting, nullptr, data, config); });
}

TEST_F(RolloutTest, NaNForecastsAreExcludedAndCounted) {
  const FlakyForecaster flaky(config.lookback, config.horizon, 2);
  const EvalReport r = rollout(flaky, nullptr, data, config);
  int expected = 0;
  for (const auto& w : r.windows) {
    if (w.index % 3 == 1) {
      EXPECT_TRUE(w.excluded);
      ++expected;
    } else {
      EXPECT_FALSE(w.excluded);
    }
  }
  EXPECT_EQ(r.excluded_windows, expected);
  EXPECT_TRUE(std::isfinite(r.at("full").mse_steps));
  EXPECT_EQ(r.at("full").count,
            static_cast<std::int64_t>(r.windows.size() - expected) * config.horizon * 2);
}

TEST_F(RolloutTest, BackboneShapeMismatchIsConfigError) {
  const auto wrong = OracleBiasForecaster::constant(config.lookback, 12, 2, 0.3);
  try {
    rollout(*wrong, nullptr, data, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST_F(RolloutTest, WarmupAggregateSkipsFirstWindows) {
  RolloutConfig c = config;
  c.warmup_windows = 5;
  const EvalReport r = rollout(*backbone, nullptr, data, c);
  EXPECT_EQ(r.at("post_warmup").count,
            static_cast<std::int64_t>(r.windows.size() - 5) * config.horizon * 2);
}

// --- protocols ------------------------------------------------------------------

class ProtocolTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config = small_config(96, 96);
    data = prepare_dataset(stream(8000), config);
    backbone = OracleBiasForecaster::constant(96, 96, 2, 0.3);
    decoder = fit_decoder(*backbone, data, config);
  }
  RolloutConfig config;
  Dataset data;
  ForecasterPtr backbone;
  std::shared_ptr<const DecoderParams> decoder;
};

TEST_F(ProtocolTest, SparseBoundaryWithNoPointsIsZeroShot) {
  ProtocolSpec p;
  p.kind = ProtocolSpec::Kind::kSparseBoundary;
  p.sparse_points = 0;
  p.ranges = {{"near", {4, 27}}, {"far", {73, 96}}};
  const EvalReport r = rollout(*backbone, decoder, data, config, p);
  for (const char* range : {"near", "far", "full"}) {
    EXPECT_EQ(r.at(range).mse_steps, r.at(range).mse_zero) << range;
  }
  p.sparse_points = 96;
  EXPECT_THROW(rollout(*backbone, decoder, data, config, p), Error);
}

TEST_F(ProtocolTest, SparseBoundaryReportsBothFields) {
  const ExperimentResult res = protocol_sparse_boundary(*backbone, decoder, data, config, 3);
  EXPECT_LE(res.find("full", "3", "near").metrics.mse_steps,
            res.find("full", "3", "near").metrics.mse_zero);
  EXPECT_TRUE(res.summary.contains("far_degradation"));
  RolloutConfig short_h = small_config(96, 48);
  EXPECT_THROW(protocol_sparse_boundary(*backbone, decoder, data, short_h, 3), Error);
}

TEST_F(ProtocolTest, ZeroAnchorsIsZeroShot) {
  ProtocolSpec p;
  p.kind = ProtocolSpec::Kind::kSparseAnchor;
  p.anchor_ratio = 0.01;
  p.ranges = {{"eval", {37, 60}}};
  const EvalReport r = rollout(*backbone, decoder, data, config, p);
  EXPECT_EQ(r.at("eval").mse_steps, r.at("eval").mse_zero);
  for (const auto& w : r.windows) EXPECT_EQ(w.prefix_length, 0);
}

TEST_F(ProtocolTest, PerfectAnchorsGiveNoCorrection) {
  const auto perfect = OracleBiasForecaster::constant(96, 96, 2, 0.0);
  ProtocolSpec p;
  p.kind = ProtocolSpec::Kind::kSparseAnchor;
  p.anchor_ratio = 0.2;
  p.ranges = {{"eval", {37, 60}}};
  const EvalReport r = rollout(*perfect, nullptr, data, config, p);
  EXPECT_EQ(r.at("eval").mse_zero, 0.0);
  EXPECT_LT(r.at("eval").mse_steps, 1e-24);
  for (const auto& w : r.windows) EXPECT_EQ(w.prefix_length, 36);
}

TEST_F(ProtocolTest, AnchorProtocolCountsAndRange) {
  const ExperimentResult res = protocol_sparse_anchor(*backbone, decoder, data, config);
  EXPECT_EQ(res.summary.at("anchors").at("0.05"), 2);
  EXPECT_EQ(res.summary.at("anchors").at("0.1"), 4);
  EXPECT_EQ(res.summary.at("anchors").at("0.2"), 7);
  EXPECT_EQ(res.find("full", "0.05", "eval").metrics.count,
            res.find("full", "0.2", "eval").metrics.count);
}

TEST_F(ProtocolTest, ContaminationLeavesZeroShotUntouched) {
  const ExperimentResult res =
      protocol_contamination(*backbone, decoder, data, config, {0.0, 0.1, 0.2});
  EXPECT_TRUE(res.summary.at("zero_shot_identical").get<bool>());
  const double base = res.find("full", "0").metrics.mse_zero;
  EXPECT_EQ(res.find("full", "0.2").metrics.mse_zero, base);
  EXPECT_EQ(res.find("no_bound", "0.1").metrics.mse_zero, base);
  EXPECT_THROW(protocol_contamination(*backbone, decoder, data, config, {0.1}), Error);
}

TEST_F(ProtocolTest, ContaminationAtRatioZeroMatchesStandard) {
  ProtocolSpec p;
  p.kind = ProtocolSpec::Kind::kContamination;
  p.contamination_ratio = 0.0;
  p.sigma = training_sigma(data);
  const EvalReport a = rollout(*backbone, decoder, data, config, p);
  const EvalReport b = rollout(*backbone, decoder, data, config);
  EXPECT_EQ(a.at("full").mse_steps, b.at("full").mse_steps);
}

TEST_F(ProtocolTest, AblationVariantsShareCheckpoint) {
  const ExperimentResult res = run_ablation(*backbone, decoder, data, config);
  for (const char* v : {"full", "local_only", "global_only", "no_bound", "no_memory"}) {
    EXPECT_TRUE(res.summary.at("improvement").contains(v)) << v;
    EXPECT_EQ(res.find(v, "96").metrics.mse_zero, res.find("full", "96").metrics.mse_zero);
  }
  // Clean prefixes: lifting the bound can only help on this fixture.
  EXPECT_LE(res.find("no_bound", "96").metrics.mse_steps,
            res.find("full", "96").metrics.mse_steps * (1 + 1e-12));
}

// Bias 0.5 exp(-h/48): strong early, vanishing far out.
Matrix decaying_bias(int horizon, int channels) {
  Matrix b(horizon, channels);
  for (int h = 0; h < horizon; ++h) b.row(h).setConstant(0.5 * std::exp(-(h + 1) / 48.0));
  return b;
}

TEST(LocalOnly, ImprovementShrinksWithHorizon) {
  const Dataset raw = stream(24000);
  double improvement[2];
  int i = 0;
  for (int horizon : {96, 720}) {
    RolloutConfig c = small_config(96, horizon);
    c.solver.ablation.local_only = true;
    const Dataset data = prepare_dataset(raw, c);
    const OracleBiasForecaster oracle(96, decaying_bias(horizon, 2));
    improvement[i++] = rollout(oracle, nullptr, data, c).at("full").improvement();
  }
  EXPECT_GT(improvement[0], 0.0);
  EXPECT_LT(improvement[1], improvement[0]);
}

TEST(Sweep, OneRowPerGridPoint) {
  RolloutConfig c = small_config();
  const Dataset data = prepare_dataset(stream(4000), c);
  const auto oracle = OracleBiasForecaster::constant(48, 24, 2, 0.3);
  SweepGrid grid;
  grid.memory_decay = {0.0, 0.5};
  grid.smoothness = {0.15};
  grid.prefix = {2, 0};
  const ExperimentResult res = run_sweep(*oracle, nullptr, data, c, grid);
  int full_rows = 0;
  for (const auto& row : res.rows) full_rows += row.range == "full";
  EXPECT_EQ(full_rows, 5);
  EXPECT_TRUE(res.summary.at("memory_decay").contains("0.5"));
  EXPECT_TRUE(res.summary.at("prefix_length").contains("fft"));
  EXPECT_TRUE(res.summary.at("smoothness_alpha").contains("0.15"));
}

TEST(BenchLatency, ParameterCountGrowsWithHorizon) {
  SolverConfig s;
  s.hidden = 16;
  LatencySpec spec;
  spec.horizons = {24, 48, 96};
  spec.batch = 4;
  spec.channels = 2;
  spec.repetitions = 2;
  const auto rows = bench_latency(s, spec);
  ASSERT_EQ(rows.size(), 6u);
  std::int64_t previous = 0;
  for (const auto& r : rows) {
    if (r.kernel != "serial") continue;
    EXPECT_GT(r.parameters, previous);
    previous = r.parameters;
    EXPECT_GT(r.windows_per_second, 0.0);
  }
}

}  // namespace
