// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "steps/kernels.hpp"
#include "steps/memory_decoder.hpp"
#include "steps/prefix_boundary.hpp"
#include "steps/rng.hpp"
#include "steps/solver.hpp"

namespace {

using steps::Matrix;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  steps::Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

template <bool Parallel>
void BM_DecoderForward(benchmark::State& state) {
  const int horizon = static_cast<int>(state.range(0));
  const auto params = steps::DecoderParams::initialize(horizon, 8, 256, 1.5, 1);
  const Matrix features = random_matrix(params.input_width(), 48 * 7, 2);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel) {
      steps::kernels::decoder_forward_parallel(params, features, out);
    } else {
      steps::kernels::decoder_forward_serial(params, features, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * features.cols());
}

template <bool Parallel>
void BM_FitChannelMaps(benchmark::State& state) {
  const Matrix series = random_matrix(4000, 7, 3);
  for (auto _ : state) {
    auto maps = Parallel ? steps::kernels::fit_channel_maps_parallel(series, 96, 96, 1.0)
                         : steps::kernels::fit_channel_maps_serial(series, 96, 96, 1.0);
    benchmark::DoNotOptimize(maps.data());
  }
}

template <bool Parallel>
void BM_CorrectBatch(benchmark::State& state) {
  const int horizon = static_cast<int>(state.range(0));
  steps::SolverConfig config;
  auto params = std::make_shared<steps::DecoderParams>(
      steps::DecoderParams::initialize(horizon, config.context_size, config.hidden, 1.5, 4));
  const steps::StepsSolver solver(config, params);
  std::vector<Matrix> forecasts;
  std::vector<steps::PrefixBoundary> boundaries;
  for (int b = 0; b < 48; ++b) {
    forecasts.push_back(random_matrix(horizon, 7, 10 + b));
    const Matrix truth = forecasts.back() + random_matrix(horizon, 7, 100 + b) * 0.1;
    boundaries.push_back(steps::build_boundary(truth.topRows(4), forecasts.back()));
  }
  std::vector<steps::kernels::CorrectionTask> tasks;
  for (int b = 0; b < 48; ++b) tasks.push_back({&forecasts[b], &boundaries[b]});
  const Matrix memory = Matrix::Zero(horizon, 7);
  const steps::Vector context = steps::Vector::Zero(2 * config.context_size);
  for (auto _ : state) {
    auto fields = Parallel ? steps::kernels::correct_batch_parallel(solver, tasks, memory, context)
                           : steps::kernels::correct_batch_serial(solver, tasks, memory, context);
    benchmark::DoNotOptimize(fields.data());
  }
  state.SetItemsProcessed(state.iterations() * 48);
}

}  // namespace

BENCHMARK(BM_DecoderForward<false>)->Arg(96)->Arg(336)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecoderForward<true>)->Arg(96)->Arg(336)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitChannelMaps<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitChannelMaps<true>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CorrectBatch<false>)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CorrectBatch<true>)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
