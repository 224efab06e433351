#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steps/fusion.hpp"
#include "steps/protocols.hpp"
#include "steps/rollout.hpp"

namespace steps {

/// Shortest round-trip text for a double ("%.17g"); identical inputs give
/// identical bytes.
std::string format_number(double value);

/// Per-window metrics, one line per (window, range).
void write_window_csv(std::ostream& out, const EvalReport& report);
/// Aggregate metrics of a single rollout, one line per range.
void write_metrics_csv(std::ostream& out, const EvalReport& report, const std::string& experiment);
void write_result_csv(std::ostream& out, const ExperimentResult& result);
void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows);
/// Ramp and share tables for each horizon.
void write_schedule_csv(std::ostream& out, const FusionSchedule& schedule,
                        const std::vector<int>& horizons);

/// Writes `text` to `path`, creating parent directories. Data error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace steps
