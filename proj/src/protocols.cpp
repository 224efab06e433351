#include "steps/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>

#include "steps/errors.hpp"
#include "steps/kernels.hpp"
#include "steps/prefix_boundary.hpp"
#include "steps/rng.hpp"

namespace steps {

namespace {

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void append_rows(ExperimentResult& out, const EvalReport& report, const std::string& experiment,
                 const std::string& variant, const std::string& parameter,
                 const std::string& value) {
  for (const auto& [range, metrics] : report.metrics) {
    out.rows.push_back({experiment, variant, parameter, value, range, metrics});
  }
}

void require_horizon(const RolloutConfig& config, int needed, const char* what) {
  require(config.horizon >= needed, ErrorKind::kConfig,
          std::string(what) + " needs H >= " + std::to_string(needed));
}

}  // namespace

const ResultRow& ExperimentResult::find(const std::string& variant, const std::string& value,
                                        const std::string& range) const {
  for (const auto& row : rows) {
    if (row.variant == variant && row.value == value && row.range == range) return row;
  }
  fail(ErrorKind::kInvalidArgument,
       "no result row for variant=" + variant + " value=" + value + " range=" + range);
}

ExperimentResult protocol_contamination(const Forecaster& backbone,
                                        std::shared_ptr<const DecoderParams> decoder,
                                        const Dataset& data, const RolloutConfig& config,
                                        const std::vector<double>& ratios) {
  require(!ratios.empty() && ratios.front() == 0.0, ErrorKind::kConfig,
          "contamination grid must start at ratio 0");
  ProtocolSpec spec;
  spec.kind = ProtocolSpec::Kind::kContamination;
  spec.sigma = training_sigma(data);

  ExperimentResult out;
  bool zero_shot_identical = true;
  double zero_shot_reference = 0.0;
  bool have_reference = false;
  for (const char* variant : {"full", "no_bound"}) {
    RolloutConfig run = config;
    run.solver.ablation.no_bound = std::string(variant) == "no_bound";
    double clean = 0.0;
    double degradation = 0.0;
    int nonzero = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      spec.contamination_ratio = ratios[i];
      const EvalReport report = rollout(backbone, decoder, data, run, spec);
      append_rows(out, report, "contamination", variant, "ratio", label(ratios[i]));
      const RangeMetrics& m = report.at("full");
      if (!have_reference) {
        zero_shot_reference = m.mse_zero;
        have_reference = true;
      }
      zero_shot_identical = zero_shot_identical && m.mse_zero == zero_shot_reference;
      if (i == 0) {
        clean = m.mse_steps;
      } else {
        require(clean > 0.0, ErrorKind::kNumerical, "clean corrected MSE is zero");
        degradation += (m.mse_steps - clean) / clean;
        ++nonzero;
      }
    }
    out.summary["degradation"][variant] = nonzero > 0 ? degradation / nonzero : 0.0;
  }
  out.summary["zero_shot_identical"] = zero_shot_identical;
  out.summary["ratios"] = ratios;
  return out;
}

ExperimentResult protocol_sparse_boundary(const Forecaster& backbone,
                                          std::shared_ptr<const DecoderParams> decoder,
                                          const Dataset& data, const RolloutConfig& config,
                                          int points) {
  require_horizon(config, 96, "sparse-boundary protocol");
  ProtocolSpec spec;
  spec.kind = ProtocolSpec::Kind::kSparseBoundary;
  spec.sparse_points = points;
  spec.ranges = {{"near", {4, 27}}, {"far", {73, 96}}};
  const EvalReport report = rollout(backbone, decoder, data, config, spec);

  ExperimentResult out;
  append_rows(out, report, "sparse_boundary", "full", "points", std::to_string(points));
  const RangeMetrics& near = report.at("near");
  const RangeMetrics& far = report.at("far");
  out.summary["points"] = points;
  out.summary["near_improvement"] = near.improvement();
  out.summary["far_improvement"] = far.improvement();
  out.summary["far_degradation"] =
      far.mse_zero > 0.0 ? (far.mse_steps - far.mse_zero) / far.mse_zero : 0.0;
  return out;
}

ExperimentResult protocol_sparse_anchor(const Forecaster& backbone,
                                        std::shared_ptr<const DecoderParams> decoder,
                                        const Dataset& data, const RolloutConfig& config,
                                        const std::vector<double>& ratios) {
  require_horizon(config, 60, "sparse-anchor protocol");
  ProtocolSpec spec;
  spec.kind = ProtocolSpec::Kind::kSparseAnchor;
  spec.anchor_support = 36;
  spec.ranges = {{"eval", {37, 60}}};

  ExperimentResult out;
  for (const double ratio : ratios) {
    spec.anchor_ratio = ratio;
    const EvalReport report = rollout(backbone, decoder, data, config, spec);
    append_rows(out, report, "sparse_anchor", "full", "ratio", label(ratio));
    out.summary["anchors"][label(ratio)] = anchor_count(ratio, spec.anchor_support);
    out.summary["eval_improvement"][label(ratio)] = report.at("eval").improvement();
  }
  return out;
}

ExperimentResult run_ablation(const Forecaster& backbone,
                              std::shared_ptr<const DecoderParams> decoder, const Dataset& data,
                              const RolloutConfig& config) {
  const std::vector<std::pair<std::string, AblationFlags>> variants = {
      {"full", {}},
      {"local_only", {.local_only = true}},
      {"global_only", {.global_only = true}},
      {"no_bound", {.no_bound = true}},
      {"no_memory", {.no_memory = true}},
  };
  ExperimentResult out;
  for (const auto& [name, flags] : variants) {
    RolloutConfig run = config;
    run.solver.ablation = flags;
    const EvalReport report = rollout(backbone, decoder, data, run);
    append_rows(out, report, "ablation", name, "horizon", std::to_string(config.horizon));
    out.summary["improvement"][name] = report.at("full").improvement();
  }
  return out;
}

ExperimentResult run_sweep(const Forecaster& backbone, std::shared_ptr<const DecoderParams> decoder,
                           const Dataset& data, const RolloutConfig& config,
                           const SweepGrid& grid) {
  struct Point {
    std::string parameter;
    std::string value;
    RolloutConfig config;
  };
  std::vector<Point> points;
  for (const double rho : grid.memory_decay) {
    Point p{"memory_decay", label(rho), config};
    p.config.solver.memory_decay = rho;
    points.push_back(std::move(p));
  }
  for (const double alpha : grid.smoothness) {
    Point p{"smoothness_alpha", label(alpha), config};
    p.config.solver.local.smoothness = alpha;
    points.push_back(std::move(p));
  }
  for (const int a : grid.prefix) {
    Point p{"prefix_length", a > 0 ? std::to_string(a) : "fft", config};
    if (a > 0) {
      p.config.fixed_prefix = a;
    } else {
      p.config.fixed_prefix.reset();
    }
    points.push_back(std::move(p));
  }
  for (const auto& p : points) p.config.validate();

  std::vector<EvalReport> reports(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      reports[i] = rollout(backbone, decoder, data, points[i].config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    append_rows(out, reports[i], "sweep", "full", points[i].parameter, points[i].value);
    out.summary[points[i].parameter][points[i].value] = reports[i].at("full").improvement();
  }
  return out;
}

std::vector<LatencyRow> bench_latency(const SolverConfig& solver_config, const LatencySpec& spec) {
  require(spec.repetitions >= 1 && spec.batch >= 1 && spec.channels >= 1, ErrorKind::kConfig,
          "latency bench needs positive batch, channels and repetitions");
  std::vector<LatencyRow> rows;
  for (const int horizon : spec.horizons) {
    require(spec.prefix >= 1 && spec.prefix < horizon, ErrorKind::kConfig,
            "bench prefix must lie in [1, H)");
    auto params = std::make_shared<DecoderParams>(
        DecoderParams::initialize(horizon, solver_config.context_size, solver_config.hidden,
                                  solver_config.output_scale, spec.seed));
    const StepsSolver solver(solver_config, params);

    Rng rng(spec.seed + static_cast<std::uint64_t>(horizon));
    std::vector<Matrix> forecasts, truths;
    for (int b = 0; b < spec.batch; ++b) {
      Matrix f(horizon, spec.channels), y(horizon, spec.channels);
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        f(i) = rng.normal();
        y(i) = f(i) + 0.3 + 0.1 * rng.normal();
      }
      forecasts.push_back(std::move(f));
      truths.push_back(std::move(y));
    }

    for (const bool parallel : {false, true}) {
      ErrorMemory memory(horizon, spec.channels, solver_config.context_size,
                         solver_config.memory_decay);
      std::vector<double> times;
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<PrefixBoundary> boundaries;
        boundaries.reserve(forecasts.size());
        std::vector<kernels::CorrectionTask> tasks;
        for (std::size_t b = 0; b < forecasts.size(); ++b) {
          boundaries.push_back(build_boundary(truths[b].topRows(spec.prefix), forecasts[b]));
        }
        for (std::size_t b = 0; b < forecasts.size(); ++b) {
          tasks.push_back({&forecasts[b], &boundaries[b]});
        }
        const auto fields =
            parallel ? kernels::correct_batch_parallel(solver, tasks, memory.error_template(),
                                                       memory.context_vector())
                     : kernels::correct_batch_serial(solver, tasks, memory.error_template(),
                                                     memory.context_vector());
        std::vector<Matrix> residuals;
        residuals.reserve(fields.size());
        for (std::size_t b = 0; b < fields.size(); ++b) {
          residuals.push_back(truths[b] - forecasts[b]);
        }
        memory.update(residuals);
        times.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count());
      }
      std::vector<double> sorted = times;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t m = sorted.size();
      const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
      double mean = 0.0;
      for (const double t : times) mean += t;
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (const double t : times) var += (t - mean) * (t - mean);
      var = m > 1 ? var / static_cast<double>(m - 1) : 0.0;

      LatencyRow row;
      row.horizon = horizon;
      row.kernel = parallel ? "parallel" : "serial";
      row.batch = spec.batch;
      row.channels = spec.channels;
      row.prefix = spec.prefix;
      row.repetitions = spec.repetitions;
      row.median_ms_batch = median;
      row.variance_ms2 = var;
      row.ms_per_window = median / spec.batch;
      row.windows_per_second = median > 0.0 ? 1000.0 * spec.batch / median : 0.0;
      row.parameters = params->parameter_count();
      row.multiply_adds = params->multiply_adds();
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace steps
