#include "steps/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <functional>
#include <sstream>

#include "steps/errors.hpp"

namespace steps {

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::kConfig,
          "config key '" + key + "': '" + v + "' is not a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::kConfig,
          "config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::kConfig, "config key '" + key + "': '" + v + "' is not a boolean");
}

using Setter = std::function<void(RolloutConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // Solver hyperparameters, named after their table entries.
      {"minimum_prefix_support", [](auto& c, auto& k, auto& v) { c.solver.min_prefix_support = static_cast<int>(to_int(k, v)); }},
      {"smoothness_alpha", [](auto& c, auto& k, auto& v) { c.solver.local.smoothness = to_double(k, v); }},
      {"ridge_coefficient", [](auto& c, auto& k, auto& v) { c.solver.local.ridge = to_double(k, v); }},
      {"basis_coefficient_clip", [](auto& c, auto& k, auto& v) { c.solver.local.coefficient_clip = to_double(k, v); }},
      {"local_response_mix", [](auto& c, auto& k, auto& v) { c.solver.local.response_mix = to_double(k, v); }},
      {"context_size", [](auto& c, auto& k, auto& v) { c.solver.context_size = static_cast<int>(to_int(k, v)); }},
      {"hidden_dimension", [](auto& c, auto& k, auto& v) { c.solver.hidden = static_cast<int>(to_int(k, v)); }},
      {"memory_decay", [](auto& c, auto& k, auto& v) { c.solver.memory_decay = to_double(k, v); }},
      {"global_response_scale", [](auto& c, auto& k, auto& v) { c.solver.output_scale = to_double(k, v); }},
      {"global_mixing", [](auto& c, auto& k, auto& v) { c.solver.fusion.global_mix = to_double(k, v); }},
      {"ramp_midpoint", [](auto& c, auto& k, auto& v) { c.solver.fusion.ramp_midpoint = to_double(k, v); }},
      {"ramp_sharpness", [](auto& c, auto& k, auto& v) { c.solver.fusion.ramp_sharpness = to_double(k, v); }},
      {"final_correction_clip", [](auto& c, auto& k, auto& v) { c.solver.fusion.clip = to_double(k, v); }},
      // Ablations.
      {"local_only", [](auto& c, auto& k, auto& v) { c.solver.ablation.local_only = to_bool(k, v); }},
      {"global_only", [](auto& c, auto& k, auto& v) { c.solver.ablation.global_only = to_bool(k, v); }},
      {"no_bound", [](auto& c, auto& k, auto& v) { c.solver.ablation.no_bound = to_bool(k, v); }},
      {"no_memory", [](auto& c, auto& k, auto& v) { c.solver.ablation.no_memory = to_bool(k, v); }},
      // Decoder training.
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.trainer.learning_rate = to_double(k, v); }},
      {"weight_decay", [](auto& c, auto& k, auto& v) { c.trainer.weight_decay = to_double(k, v); }},
      {"gradient_clip", [](auto& c, auto& k, auto& v) { c.trainer.gradient_clip = to_double(k, v); }},
      {"fitting_epochs", [](auto& c, auto& k, auto& v) { c.trainer.epochs = static_cast<int>(to_int(k, v)); }},
      {"max_training_batches", [](auto& c, auto& k, auto& v) { c.trainer.max_batches = static_cast<int>(to_int(k, v)); }},
      {"batch_windows", [](auto& c, auto& k, auto& v) { c.trainer.batch_windows = static_cast<int>(to_int(k, v)); }},
      // Rollout.
      {"lookback", [](auto& c, auto& k, auto& v) { c.lookback = static_cast<int>(to_int(k, v)); }},
      {"horizon", [](auto& c, auto& k, auto& v) { c.horizon = static_cast<int>(to_int(k, v)); }},
      {"stride", [](auto& c, auto& k, auto& v) { c.stride = static_cast<int>(to_int(k, v)); }},
      {"train_stride", [](auto& c, auto& k, auto& v) { c.train_stride = static_cast<int>(to_int(k, v)); }},
      {"prefix_length", [](auto& c, auto& k, auto& v) {
         if (v == "fft") c.fixed_prefix.reset(); else c.fixed_prefix = static_cast<int>(to_int(k, v));
       }},
      {"group_completed", [](auto& c, auto& k, auto& v) { c.group_completed = to_bool(k, v); }},
      {"warmup_windows", [](auto& c, auto& k, auto& v) { c.warmup_windows = static_cast<int>(to_int(k, v)); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      // Backbone and data.
      {"backbone", [](auto& c, auto&, auto& v) { c.backbone = v; }},
      {"backbone_ridge", [](auto& c, auto& k, auto& v) { c.backbone_ridge = to_double(k, v); }},
      {"seasonal_period", [](auto& c, auto& k, auto& v) { c.seasonal_period = static_cast<int>(to_int(k, v)); }},
      {"oracle_bias", [](auto& c, auto& k, auto& v) { c.oracle_bias = to_double(k, v); }},
      {"normalize", [](auto& c, auto& k, auto& v) { c.normalize = to_bool(k, v); }},
      {"split", [](auto& c, auto&, auto& v) { c.split = v; }},
      {"missing_policy", [](auto& c, auto&, auto& v) { c.missing_policy = missing_policy_from_string(v); }},
  };
  return table;
}

}  // namespace

TrainerConfig RolloutConfig::effective_trainer() const {
  TrainerConfig t = trainer;
  t.hidden = solver.hidden;
  t.output_scale = solver.output_scale;
  t.schedule = solver.fusion;
  t.seed = seed;
  return t;
}

void RolloutConfig::validate() const {
  require(lookback >= 4, ErrorKind::kConfig, "lookback must be >= 4");
  require(horizon >= 2, ErrorKind::kConfig, "horizon must be >= 2");
  require(stride >= 0 && train_stride >= 0, ErrorKind::kConfig, "strides must be >= 0");
  require(!fixed_prefix || *fixed_prefix >= 0, ErrorKind::kConfig, "prefix length must be >= 0");
  require(warmup_windows >= 0, ErrorKind::kConfig, "warmup_windows must be >= 0");
  require(backbone_ridge > 0.0, ErrorKind::kConfig, "backbone_ridge must be > 0");
  backbone_kind_from_string(backbone);
  solver.validate();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            "config line " + std::to_string(line_no) + ": expected 'key = value'");
    out[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return out;
}

void apply_setting(RolloutConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  require(it != table.end(), ErrorKind::kConfig, "unknown config key '" + key + "'");
  it->second(config, key, value);
}

RolloutConfig load_config_file(const std::filesystem::path& path, RolloutConfig base) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kConfig, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  for (const auto& [k, v] : parse_key_values(buffer.str())) apply_setting(base, k, v);
  return base;
}

nlohmann::json to_json(const RolloutConfig& c) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  return {
      {"minimum_prefix_support", c.solver.min_prefix_support},
      {"smoothness_alpha", c.solver.local.smoothness},
      {"ridge_coefficient", c.solver.local.ridge},
      {"basis_coefficient_clip", c.solver.local.coefficient_clip},
      {"local_response_mix", c.solver.local.response_mix},
      {"context_size", c.solver.context_size},
      {"hidden_dimension", c.solver.hidden},
      {"memory_decay", c.solver.memory_decay},
      {"global_response_scale", c.solver.output_scale},
      {"global_mixing", c.solver.fusion.global_mix},
      {"ramp_midpoint", c.solver.fusion.ramp_midpoint},
      {"ramp_sharpness", c.solver.fusion.ramp_sharpness},
      {"final_correction_clip", num(c.solver.fusion.clip)},
      {"local_only", c.solver.ablation.local_only},
      {"global_only", c.solver.ablation.global_only},
      {"no_bound", c.solver.ablation.no_bound},
      {"no_memory", c.solver.ablation.no_memory},
      {"learning_rate", c.trainer.learning_rate},
      {"weight_decay", c.trainer.weight_decay},
      {"gradient_clip", c.trainer.gradient_clip},
      {"fitting_epochs", c.trainer.epochs},
      {"max_training_batches", c.trainer.max_batches},
      {"batch_windows", c.trainer.batch_windows},
      {"lookback", c.lookback},
      {"horizon", c.horizon},
      {"stride", c.effective_stride()},
      {"train_stride", c.effective_train_stride()},
      {"prefix_length", c.fixed_prefix ? nlohmann::json(*c.fixed_prefix) : nlohmann::json("fft")},
      {"group_completed", c.group_completed},
      {"warmup_windows", c.warmup_windows},
      {"seed", c.seed},
      {"backbone", c.backbone},
      {"backbone_ridge", c.backbone_ridge},
      {"seasonal_period", c.seasonal_period},
      {"oracle_bias", c.oracle_bias},
      {"normalize", c.normalize},
      {"correction_units", c.normalize ? "per-window standardized" : "dataset standardized"},
      {"split", c.split},
      {"missing_policy", to_string(c.missing_policy)},
  };
}

Dataset apply_split(Dataset data, const RolloutConfig& config) {
  if (config.split == "ett-hourly") return split_dataset_ett(std::move(data), false);
  if (config.split == "ett-minute") return split_dataset_ett(std::move(data), true);
  std::array<double, 3> ratios{};
  std::istringstream in(config.split);
  std::string part;
  for (double& r : ratios) {
    require(static_cast<bool>(std::getline(in, part, ',')), ErrorKind::kConfig,
            "split must be 'ett-hourly', 'ett-minute' or three comma-separated ratios");
    r = to_double("split", strip(part));
  }
  return split_dataset(std::move(data), ratios);
}

}  // namespace steps
