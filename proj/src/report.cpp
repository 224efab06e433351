#include "steps/report.hpp"

#include <cstdio>
#include <fstream>

#include "steps/errors.hpp"

namespace steps {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

constexpr const char* kMetricColumns = "mse_zero,mse_steps,mae_zero,mae_steps,improvement,count";

void write_metrics(std::ostream& out, const RangeMetrics& m) {
  out << format_number(m.mse_zero) << ',' << format_number(m.mse_steps) << ','
      << format_number(m.mae_zero) << ',' << format_number(m.mae_steps) << ','
      << format_number(m.improvement()) << ',' << m.count;
}

}  // namespace

void write_window_csv(std::ostream& out, const EvalReport& report) {
  out << "window,origin,prefix_length,memory_version,excluded,range," << kMetricColumns << '\n';
  for (const auto& w : report.windows) {
    if (w.excluded) {
      out << w.index << ',' << w.origin << ',' << w.prefix_length << ',' << w.memory_version
          << ",1,full,nan,nan,nan,nan,nan,0\n";
      continue;
    }
    for (const auto& [range, sums] : w.ranges) {
      out << w.index << ',' << w.origin << ',' << w.prefix_length << ',' << w.memory_version
          << ",0," << range << ',';
      write_metrics(out, RangeMetrics::from(sums));
      out << '\n';
    }
  }
}

void write_metrics_csv(std::ostream& out, const EvalReport& report, const std::string& experiment) {
  out << "experiment,range," << kMetricColumns << '\n';
  for (const auto& [range, m] : report.metrics) {
    out << experiment << ',' << range << ',';
    write_metrics(out, m);
    out << '\n';
  }
}

void write_result_csv(std::ostream& out, const ExperimentResult& result) {
  out << "experiment,variant,parameter,value,range," << kMetricColumns << '\n';
  for (const auto& row : result.rows) {
    out << row.experiment << ',' << row.variant << ',' << row.parameter << ',' << row.value << ','
        << row.range << ',';
    write_metrics(out, row.metrics);
    out << '\n';
  }
}

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows) {
  out << "horizon,kernel,batch,channels,prefix,repetitions,median_ms_batch,variance_ms2,"
         "ms_per_window,windows_per_second,parameters,multiply_adds\n";
  for (const auto& r : rows) {
    out << r.horizon << ',' << r.kernel << ',' << r.batch << ',' << r.channels << ',' << r.prefix
        << ',' << r.repetitions << ',' << format_number(r.median_ms_batch) << ','
        << format_number(r.variance_ms2) << ',' << format_number(r.ms_per_window) << ','
        << format_number(r.windows_per_second) << ',' << r.parameters << ',' << r.multiply_adds
        << '\n';
  }
}

void write_schedule_csv(std::ostream& out, const FusionSchedule& schedule,
                        const std::vector<int>& horizons) {
  schedule.validate();
  out << "horizon,step,position,ramp,global_gain,local_share,global_share,transition_step\n";
  for (const int horizon : horizons) {
    const int transition = transition_step(schedule, horizon);
    for (int h = 1; h <= horizon; ++h) {
      const double q = ramp(h, horizon, schedule);
      const auto [local, global] = normalized_shares(schedule, h, horizon);
      out << horizon << ',' << h << ',' << format_number(horizon_position(h, horizon)) << ','
          << format_number(q) << ',' << format_number(schedule.global_mix * q) << ','
          << format_number(local) << ',' << format_number(global) << ',' << transition << '\n';
    }
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kData, "cannot write " + path.string());
  out << text;
  out.flush();
  require(static_cast<bool>(out), ErrorKind::kData, "write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

}  // namespace steps
