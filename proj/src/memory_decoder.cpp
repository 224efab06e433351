#include "steps/memory_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "steps/errors.hpp"
#include "steps/kernels.hpp"
#include "steps/rng.hpp"

namespace steps {

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

void fill_uniform(Vector& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

}  // namespace

DecoderParams DecoderParams::zeros(int horizon, int context_size, int hidden, double output_scale) {
  require(horizon >= 1 && context_size >= 0 && hidden >= 1, ErrorKind::kConfig,
          "decoder shape must be positive");
  DecoderParams p;
  p.horizon = horizon;
  p.context_size = context_size;
  p.hidden = hidden;
  p.output_scale = output_scale;
  p.w1 = Matrix::Zero(hidden, p.input_width());
  p.b1 = Vector::Zero(hidden);
  p.w2 = Matrix::Zero(horizon, hidden);
  p.b2 = Vector::Zero(horizon);
  return p;
}

DecoderParams DecoderParams::initialize(int horizon, int context_size, int hidden,
                                        double output_scale, std::uint64_t seed) {
  DecoderParams p = zeros(horizon, context_size, hidden, output_scale);
  p.seed = seed;
  Rng rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(p.input_width()));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(p.w1, bound1, rng);
  fill_uniform(p.b1, bound1, rng);
  fill_uniform(p.w2, bound2, rng);
  fill_uniform(p.b2, bound2, rng);
  return p;
}

std::size_t DecoderParams::parameter_count() const noexcept {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

std::size_t DecoderParams::multiply_adds() const noexcept {
  return static_cast<std::size_t>(w1.size() + w2.size());
}

std::uint64_t DecoderParams::digest() const {
  const Matrix b1m = b1;
  const Matrix b2m = b2;
  return digest_matrices({&w1, &b1m, &w2, &b2m});
}

void DecoderParams::validate() const {
  require(w1.rows() == hidden && w1.cols() == input_width() && b1.size() == hidden &&
              w2.rows() == horizon && w2.cols() == hidden && b2.size() == horizon,
          ErrorKind::kDimension, "decoder parameter shapes are inconsistent");
  require(w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
              std::isfinite(output_scale),
          ErrorKind::kNumerical, "decoder parameters contain non-finite values");
}

ParamFile DecoderParams::to_param_file() const {
  ParamFile file;
  file.kind = "memory-decoder";
  file.header = {{"horizon", horizon},
                 {"context_size", context_size},
                 {"hidden", hidden},
                 {"output_scale", output_scale},
                 {"feature_layout", kFeatureLayoutId},
                 {"seed", seed}};
  file.blocks = {{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}};
  return file;
}

DecoderParams DecoderParams::from_param_file(const ParamFile& file) {
  require(file.kind == "memory-decoder", ErrorKind::kData,
          "expected a memory-decoder parameter file, got '" + file.kind + "'");
  const auto& h = file.header;
  require(h.at("feature_layout").get<int>() == kFeatureLayoutId, ErrorKind::kData,
          "decoder feature layout " + std::to_string(h.at("feature_layout").get<int>()) +
              " does not match this build (" + std::to_string(kFeatureLayoutId) + ")");
  DecoderParams p;
  p.horizon = h.at("horizon").get<int>();
  p.context_size = h.at("context_size").get<int>();
  p.hidden = h.at("hidden").get<int>();
  p.output_scale = h.at("output_scale").get<double>();
  p.seed = h.at("seed").get<std::uint64_t>();
  p.w1 = file.block("w1");
  p.b1 = file.block("b1");
  p.w2 = file.block("w2");
  p.b2 = file.block("b2");
  p.validate();
  return p;
}

Matrix build_features(const DecoderInputs& in) {
  const Eigen::Index horizon = in.forecast.rows();
  const Eigen::Index d = in.forecast.cols();
  auto same_shape = [&](const Matrix& m) { return m.rows() == horizon && m.cols() == d; };
  require(same_shape(in.short_response) && same_shape(in.padded_error) && same_shape(in.memory) &&
              in.mask.size() == horizon,
          ErrorKind::kDimension, "decoder inputs disagree in horizon or channel count");
  require(!in.forecast.hasNaN() && !in.short_response.hasNaN() && !in.padded_error.hasNaN() &&
              !in.mask.hasNaN() && !in.memory.hasNaN() && !in.context.hasNaN(),
          ErrorKind::kNumerical, "decoder input contains NaN");

  const Eigen::Index k2 = in.context.size();
  Matrix features(5 * horizon + k2, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    auto col = features.col(c);
    col.segment(0, horizon) = in.forecast.col(c);
    col.segment(horizon, horizon) = in.short_response.col(c);
    col.segment(2 * horizon, horizon) = in.padded_error.col(c);
    col.segment(3 * horizon, horizon) = in.mask;
    col.segment(4 * horizon, horizon) = in.memory.col(c);
    col.segment(5 * horizon, k2) = in.context;
  }
  return features;
}

Matrix decode_features(const DecoderParams& params, const Matrix& features) {
  require(features.rows() == params.input_width(), ErrorKind::kDimension,
          "decoder expects " + std::to_string(params.input_width()) + " features per channel, got " +
              std::to_string(features.rows()));
  Matrix out(params.horizon, features.cols());
  kernels::decoder_forward_parallel(params, features, out);
  return out;
}

Matrix decode(const DecoderParams& params, const DecoderInputs& inputs) {
  require(inputs.forecast.rows() == params.horizon, ErrorKind::kDimension,
          "decoder was built for H=" + std::to_string(params.horizon));
  require(inputs.context.size() == 2 * params.context_size, ErrorKind::kDimension,
          "decoder context vector must have length 2K");
  return decode_features(params, build_features(inputs));
}

double DecoderGradients::squared_norm() const {
  return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
}

void DecoderGradients::scale(double factor) {
  w1 *= factor;
  b1 *= factor;
  w2 *= factor;
  b2 *= factor;
}

double decoder_loss(const DecoderParams& params, std::span<const DecoderSample> samples,
                    const FusionSchedule& schedule, DecoderGradients* gradients) {
  require(!samples.empty(), ErrorKind::kInvalidArgument, "decoder_loss: no samples");
  const Eigen::Index horizon = params.horizon;
  Eigen::Index columns = 0;
  for (const auto& s : samples) columns += s.features.cols();

  Matrix features(params.input_width(), columns);
  Matrix short_response(horizon, columns);
  Matrix residual(horizon, columns);
  Eigen::Index offset = 0;
  for (const auto& s : samples) {
    const Eigen::Index n = s.features.cols();
    require(s.features.rows() == params.input_width() && s.short_response.rows() == horizon &&
                s.residual.rows() == horizon && s.short_response.cols() == n &&
                s.residual.cols() == n,
            ErrorKind::kDimension, "decoder sample shape does not match the parameters");
    features.middleCols(offset, n) = s.features;
    short_response.middleCols(offset, n) = s.short_response;
    residual.middleCols(offset, n) = s.residual;
    offset += n;
  }

  const Vector gain = global_gain(static_cast<int>(horizon), schedule);
  const Matrix hidden = ((params.w1 * features).colwise() + params.b1).array().tanh().matrix();
  const Matrix out = params.output_scale * ((params.w2 * hidden).colwise() + params.b2);
  const Matrix error = short_response + gain.asDiagonal() * out - residual;
  const double norm = 1.0 / static_cast<double>(horizon * columns);
  const double loss = error.squaredNorm() * norm;

  if (gradients != nullptr) {
    const Matrix d_out = (2.0 * norm) * (gain.asDiagonal() * error);
    const Matrix d_pre2 = params.output_scale * d_out;
    gradients->w2 = d_pre2 * hidden.transpose();
    gradients->b2 = d_pre2.rowwise().sum();
    const Matrix d_hidden = params.w2.transpose() * d_pre2;
    const Matrix d_pre1 = (d_hidden.array() * (1.0 - hidden.array().square())).matrix();
    gradients->w1 = d_pre1 * features.transpose();
    gradients->b1 = d_pre1.rowwise().sum();
  }
  return loss;
}

namespace {

struct AdamState {
  Matrix m_w1, v_w1, m_w2, v_w2;
  Vector m_b1, v_b1, m_b2, v_b2;
};

template <typename T>
void adamw_update(T& param, T& m, T& v, const T& grad, const TrainerConfig& cfg, int step) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, step);
  const double c2 = 1.0 - std::pow(beta2, step);
  param *= (1.0 - cfg.learning_rate * cfg.weight_decay);
  param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

TrainingResult train_decoder(std::span<const DecoderSample> samples, int context_size,
                             const TrainerConfig& config) {
  require(!samples.empty(), ErrorKind::kInvalidArgument,
          "untrained decoder: the training set is empty");
  require(config.epochs >= 1 && config.max_batches >= 1 && config.batch_windows >= 1,
          ErrorKind::kConfig, "trainer needs positive epochs, batches and batch size");
  config.schedule.validate();
  const int horizon = static_cast<int>(samples.front().residual.rows());

  TrainingResult result;
  result.params = DecoderParams::initialize(horizon, context_size, config.hidden,
                                            config.output_scale, config.seed);
  DecoderParams& params = result.params;

  // Shuffle windows once, cut into batches, keep at most max_batches.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<DecoderSample>> batches;
  for (std::size_t start = 0; start < order.size() &&
                              static_cast<int>(batches.size()) < config.max_batches;
       start += config.batch_windows) {
    std::vector<DecoderSample> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + config.batch_windows); ++i) {
      batch.push_back(samples[order[i]]);
    }
    batches.push_back(std::move(batch));
  }
  result.batches_used = static_cast<int>(batches.size());

  auto full_loss = [&] {
    double total = 0.0;
    for (const auto& b : batches) total += decoder_loss(params, b, config.schedule);
    return total / static_cast<double>(batches.size());
  };
  result.initial_loss = full_loss();

  AdamState st;
  st.m_w1 = st.v_w1 = Matrix::Zero(params.w1.rows(), params.w1.cols());
  st.m_w2 = st.v_w2 = Matrix::Zero(params.w2.rows(), params.w2.cols());
  st.m_b1 = st.v_b1 = Vector::Zero(params.b1.size());
  st.m_b2 = st.v_b2 = Vector::Zero(params.b2.size());

  std::vector<std::size_t> batch_order(batches.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  int step = 0;
  DecoderGradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = batch_order.size(); i > 1; --i) {
      std::swap(batch_order[i - 1], batch_order[rng.below(i)]);
    }
    double epoch_total = 0.0;
    for (std::size_t bi : batch_order) {
      const double loss = decoder_loss(params, batches[bi], config.schedule, &grads);
      require(std::isfinite(loss), ErrorKind::kNumerical,
              "decoder training diverged at step " + std::to_string(step) + " (loss is not finite)");
      const double norm = std::sqrt(grads.squared_norm());
      if (norm > config.gradient_clip) grads.scale(config.gradient_clip / norm);
      ++step;
      adamw_update(params.w1, st.m_w1, st.v_w1, grads.w1, config, step);
      adamw_update(params.b1, st.m_b1, st.v_b1, grads.b1, config, step);
      adamw_update(params.w2, st.m_w2, st.v_w2, grads.w2, config, step);
      adamw_update(params.b2, st.m_b2, st.v_b2, grads.b2, config, step);
      result.step_loss.push_back(loss);
      epoch_total += loss;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(batches.size()));
  }
  result.final_loss = full_loss();
  require(std::isfinite(result.final_loss), ErrorKind::kNumerical,
          "decoder training diverged (final loss is not finite)");
  params.validate();
  return result;
}

GradientCheckResult gradient_check(const DecoderParams& params, const DecoderSample& sample,
                                   const FusionSchedule& schedule, std::uint64_t seed,
                                   const std::function<void(DecoderGradients&)>& corrupt) {
  constexpr double kStep = 1e-4;
  constexpr int kPerBlock = 50;
  const std::span<const DecoderSample> one(&sample, 1);

  DecoderGradients analytic;
  decoder_loss(params, one, schedule, &analytic);
  if (corrupt) corrupt(analytic);

  DecoderParams probe = params;
  Rng rng(seed);
  GradientCheckResult result;

  auto check_entry = [&](double& slot, double analytic_value) {
    const double saved = slot;
    slot = saved + kStep;
    const double up = decoder_loss(probe, one, schedule);
    slot = saved - kStep;
    const double down = decoder_loss(probe, one, schedule);
    slot = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    // The 1e-6 floor keeps round-off in near-zero gradients from reading as
    // a relative error; two exact zeros give 0.
    const double scale = std::max({std::abs(analytic_value), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic_value - numeric) / scale;
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  };

  auto check_block = [&](double* data, const double* grad, Eigen::Index size) {
    const int count = static_cast<int>(std::min<Eigen::Index>(kPerBlock, size));
    for (int i = 0; i < count; ++i) {
      const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(size)));
      check_entry(data[idx], grad[idx]);
    }
  };
  check_block(probe.w1.data(), analytic.w1.data(), probe.w1.size());
  check_block(probe.b1.data(), analytic.b1.data(), probe.b1.size());
  check_block(probe.w2.data(), analytic.w2.data(), probe.w2.size());
  check_block(probe.b2.data(), analytic.b2.data(), probe.b2.size());
  return result;
}

}  // namespace steps
