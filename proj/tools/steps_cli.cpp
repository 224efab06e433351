// steps: command-line front end for the correction solver and its harness.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "steps/config.hpp"
#include "steps/errors.hpp"
#include "steps/param_file.hpp"
#include "steps/protocols.hpp"
#include "steps/report.hpp"
#include "steps/rollout.hpp"
#include "steps/synthetic.hpp"

namespace fs = std::filesystem;
using namespace steps;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> settings;
  std::string data;
  Eigen::Index synthetic_length = 24000;
  int synthetic_channels = 3;
  std::uint64_t synthetic_seed = 7;
  double synthetic_noise = 0.1;
  double synthetic_walk = 0.0;
  std::string backbone_path;
  std::string decoder_path;
  std::string out_dir = "steps_out";
  std::string out;
  std::int64_t seed = -1;

  int points = 3;
  std::vector<double> ratios;
  std::vector<int> horizons;
  int repetitions = 10;
  int batch = 48;
  int channels = 7;
  int prefix = 4;
  int inject_leak = -1;
};

fs::path resolve_data_path(const std::string& name) {
  fs::path path(name);
  if (path.is_absolute()) return path;
  if (const char* dir = std::getenv("STEPS_DATA_DIR"); dir && *dir) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate) || !fs::exists(path)) return candidate;
  }
  return path;
}

RolloutConfig build_config(const Options& opt) {
  RolloutConfig config;
  if (!opt.config_path.empty()) config = load_config_file(opt.config_path, config);
  for (const auto& s : opt.settings) {
    const auto eq = s.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig, "--set expects key=value, got '" + s + "'");
    const auto kv = parse_key_values(s);
    for (const auto& [k, v] : kv) apply_setting(config, k, v);
  }
  if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
  config.validate();
  return config;
}

Dataset load_data(const Options& opt, const RolloutConfig& config) {
  Dataset raw;
  if (opt.data.empty()) {
    SeasonalStreamSpec spec;
    spec.length = opt.synthetic_length;
    spec.channels = opt.synthetic_channels;
    spec.seed = opt.synthetic_seed;
    spec.noise = opt.synthetic_noise;
    spec.level_walk = opt.synthetic_walk;
    raw = make_seasonal_stream(spec);
  } else {
    raw = load_csv(resolve_data_path(opt.data), config.missing_policy);
  }
  for (const auto& w : raw.warnings) std::cerr << "warning: " << w << '\n';
  return prepare_dataset(std::move(raw), config);
}

ForecasterPtr obtain_backbone(const Options& opt, const Dataset& data,
                              const RolloutConfig& config) {
  if (!opt.backbone_path.empty()) {
    return forecaster_from_param_file(read_param_file(opt.backbone_path));
  }
  return make_backbone(data, config);
}

std::shared_ptr<const DecoderParams> obtain_decoder(const Options& opt, const Forecaster& backbone,
                                                    const Dataset& data,
                                                    const RolloutConfig& config) {
  if (!opt.decoder_path.empty()) {
    auto params =
        std::make_shared<const DecoderParams>(DecoderParams::from_param_file(read_param_file(opt.decoder_path)));
    require(params->horizon == config.horizon && params->context_size == config.solver.context_size,
            ErrorKind::kConfig, "decoder checkpoint does not match the configured H / context size");
    return params;
  }
  return fit_decoder(backbone, data, config);
}

std::string to_text(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

fs::path out_file(const Options& opt, const std::string& name) { return fs::path(opt.out_dir) / name; }

void save_params(const fs::path& path, const ParamFile& file) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  write_param_file(path, file);
}

void write_result(const Options& opt, const std::string& name, const ExperimentResult& result,
                  const RolloutConfig& config) {
  write_text_file(out_file(opt, name + ".csv"),
                  to_text([&](std::ostream& os) { write_result_csv(os, result); }));
  nlohmann::json manifest = {{"config", to_json(config)}, {"summary", result.summary}};
  write_json_file(out_file(opt, name + ".json"), manifest);
  std::cout << result.summary.dump(2) << '\n';
}

int cmd_fit_backbone(const Options& opt) {
  const RolloutConfig config = build_config(opt);
  const Dataset data = load_data(opt, config);
  check_split_fits(data, config.lookback, config.horizon);
  const ForecasterPtr backbone = make_backbone(data, config);
  const fs::path path = opt.out.empty() ? out_file(opt, "backbone.stp") : fs::path(opt.out);
  save_params(path, backbone->to_param_file());
  std::cout << "backbone " << to_string(backbone->kind()) << " -> " << path.string() << '\n';
  return 0;
}

int cmd_train_decoder(const Options& opt) {
  const RolloutConfig config = build_config(opt);
  const Dataset data = load_data(opt, config);
  const ForecasterPtr backbone = obtain_backbone(opt, data, config);
  TrainingResult trace;
  const auto params = fit_decoder(*backbone, data, config, &trace);
  const fs::path path = opt.out.empty() ? out_file(opt, "decoder.stp") : fs::path(opt.out);
  save_params(path, params->to_param_file());
  write_text_file(out_file(opt, "training_loss.csv"), to_text([&](std::ostream& os) {
                    os << "step,loss\n";
                    for (std::size_t i = 0; i < trace.step_loss.size(); ++i) {
                      os << i + 1 << ',' << format_number(trace.step_loss[i]) << '\n';
                    }
                  }));
  std::cout << "decoder loss " << format_number(trace.initial_loss) << " -> "
            << format_number(trace.final_loss) << " (" << trace.batches_used << " batches) -> "
            << path.string() << '\n';
  return 0;
}

int cmd_rollout(const Options& opt) {
  const RolloutConfig config = build_config(opt);
  const Dataset data = load_data(opt, config);
  const ForecasterPtr backbone = obtain_backbone(opt, data, config);
  const auto decoder = obtain_decoder(opt, *backbone, data, config);
  RolloutHooks hooks;
  hooks.inject_leak_at_window = opt.inject_leak;
  const EvalReport report = rollout(*backbone, decoder, data, config, {}, hooks);
  write_text_file(out_file(opt, "windows.csv"),
                  to_text([&](std::ostream& os) { write_window_csv(os, report); }));
  write_text_file(out_file(opt, "metrics.csv"),
                  to_text([&](std::ostream& os) { write_metrics_csv(os, report, "rollout"); }));
  write_json_file(out_file(opt, "manifest.json"), report.manifest);
  const RangeMetrics& full = report.at("full");
  std::cout << "windows " << report.windows.size() << " excluded " << report.excluded_windows
            << "\nmse zero-shot " << format_number(full.mse_zero) << " steps "
            << format_number(full.mse_steps) << " improvement "
            << format_number(100.0 * full.improvement()) << "%\n";
  return 0;
}

template <typename Fn>
int cmd_experiment(const Options& opt, const std::string& name, Fn run) {
  const RolloutConfig config = build_config(opt);
  const Dataset data = load_data(opt, config);
  const ForecasterPtr backbone = obtain_backbone(opt, data, config);
  const auto decoder = obtain_decoder(opt, *backbone, data, config);
  write_result(opt, name, run(*backbone, decoder, data, config), config);
  return 0;
}

int cmd_bench(const Options& opt) {
  const RolloutConfig config = build_config(opt);
  LatencySpec spec;
  if (!opt.horizons.empty()) spec.horizons = opt.horizons;
  spec.batch = opt.batch;
  spec.channels = opt.channels;
  spec.prefix = opt.prefix;
  spec.repetitions = opt.repetitions;
  spec.seed = config.seed;
  const auto rows = bench_latency(config.solver, spec);
  const std::string text = to_text([&](std::ostream& os) { write_latency_csv(os, rows); });
  write_text_file(out_file(opt, "latency.csv"), text);
  std::cout << text;
  return 0;
}

int cmd_dump_schedule(const Options& opt) {
  const RolloutConfig config = build_config(opt);
  const std::vector<int> horizons =
      opt.horizons.empty() ? std::vector<int>{96, 192, 336, 720} : opt.horizons;
  const std::string text = to_text([&](std::ostream& os) {
    write_schedule_csv(os, config.solver.effective_fusion(), horizons);
  });
  if (opt.out == "-") {
    std::cout << text;
  } else {
    write_text_file(opt.out.empty() ? out_file(opt, "schedule.csv") : fs::path(opt.out), text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steps: prefix-boundary test-time correction for frozen forecasters"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "key = value config file");
    sub->add_option("-s,--set", opt.settings, "override one config key (key=value)");
    sub->add_option("--seed", opt.seed, "run seed");
    sub->add_option("-o,--out-dir", opt.out_dir, "output directory");
  };
  auto add_data = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("-d,--data", opt.data,
                    "CSV file; relative paths are looked up in $STEPS_DATA_DIR first. "
                    "Without it a synthetic seasonal stream is used");
    sub->add_option("--synthetic-length", opt.synthetic_length, "rows of the synthetic stream");
    sub->add_option("--synthetic-channels", opt.synthetic_channels, "channels of the synthetic stream");
    sub->add_option("--synthetic-seed", opt.synthetic_seed, "seed of the synthetic stream");
    sub->add_option("--synthetic-noise", opt.synthetic_noise, "noise std of the synthetic stream");
    sub->add_option("--synthetic-walk", opt.synthetic_walk,
                    "per-step level random-walk std of the synthetic stream");
  };
  auto add_checkpoints = [&](CLI::App* sub) {
    sub->add_option("--backbone", opt.backbone_path, "backbone checkpoint (default: fit per config)");
    sub->add_option("--decoder", opt.decoder_path, "decoder checkpoint (default: train on validation)");
  };

  auto* fit = app.add_subcommand("fit-backbone", "fit the configured backbone on the training split");
  add_data(fit);
  fit->add_option("--out", opt.out, "checkpoint path (default <out-dir>/backbone.stp)");

  auto* train = app.add_subcommand("train-decoder", "train the memory decoder on validation rollouts");
  add_data(train);
  train->add_option("--backbone", opt.backbone_path, "backbone checkpoint");
  train->add_option("--out", opt.out, "checkpoint path (default <out-dir>/decoder.stp)");

  auto* roll = app.add_subcommand("rollout", "sequential corrected rollout over the test split");
  add_data(roll);
  add_checkpoints(roll);
  roll->add_option("--inject-leak", opt.inject_leak, "")->group("");

  auto* ablate = app.add_subcommand("ablate", "full STEPS and its test-time ablations");
  add_data(ablate);
  add_checkpoints(ablate);

  auto* contaminate = app.add_subcommand("contaminate", "prefix outlier robustness");
  add_data(contaminate);
  add_checkpoints(contaminate);
  contaminate->add_option("--ratios", opt.ratios, "outlier ratios, first must be 0")->delimiter(',');

  auto* sparse_b = app.add_subcommand("sparse-boundary", "only the first k steps revealed");
  add_data(sparse_b);
  add_checkpoints(sparse_b);
  sparse_b->add_option("-k,--points", opt.points, "revealed steps")->check(CLI::NonNegativeNumber);

  auto* sparse_a = app.add_subcommand("sparse-anchor", "scattered anchors inside the first 36 steps");
  add_data(sparse_a);
  add_checkpoints(sparse_a);
  sparse_a->add_option("--ratios", opt.ratios, "anchor ratios")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "memory decay, smoothness and prefix sensitivity");
  add_data(sweep);
  add_checkpoints(sweep);

  auto* bench = app.add_subcommand("bench", "module-only latency per horizon");
  add_common(bench);
  bench->add_option("--horizons", opt.horizons, "horizons to time")->delimiter(',');
  bench->add_option("--repetitions", opt.repetitions, "timed repetitions (median reported)");
  bench->add_option("--batch", opt.batch, "windows per batch");
  bench->add_option("--channels", opt.channels, "channels per window");
  bench->add_option("--prefix", opt.prefix, "revealed prefix length");

  auto* dump = app.add_subcommand("dump-schedule", "ramp and share tables as CSV");
  add_common(dump);
  dump->add_option("--horizons", opt.horizons, "horizons to tabulate")->delimiter(',');
  dump->add_option("--out", opt.out, "CSV path, '-' for stdout (default <out-dir>/schedule.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*fit) return cmd_fit_backbone(opt);
    if (*train) return cmd_train_decoder(opt);
    if (*roll) return cmd_rollout(opt);
    if (*ablate) {
      return cmd_experiment(opt, "ablation", [](auto&... a) { return run_ablation(a...); });
    }
    if (*contaminate) {
      return cmd_experiment(opt, "contamination", [&](auto&... a) {
        return opt.ratios.empty() ? protocol_contamination(a...)
                                  : protocol_contamination(a..., opt.ratios);
      });
    }
    if (*sparse_b) {
      return cmd_experiment(opt, "sparse_boundary",
                            [&](auto&... a) { return protocol_sparse_boundary(a..., opt.points); });
    }
    if (*sparse_a) {
      return cmd_experiment(opt, "sparse_anchor", [&](auto&... a) {
        return opt.ratios.empty() ? protocol_sparse_anchor(a...)
                                  : protocol_sparse_anchor(a..., opt.ratios);
      });
    }
    if (*sweep) return cmd_experiment(opt, "sweep", [](auto&... a) { return run_sweep(a...); });
    if (*bench) return cmd_bench(opt);
    if (*dump) return cmd_dump_schedule(opt);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
