#include "steps/error_memory.hpp"

#include <cmath>
#include <string>

#include "steps/errors.hpp"

namespace steps {

ErrorMemory::ErrorMemory(int horizon, int channels, int context_size, double decay)
    : context_size_(context_size), decay_(decay) {
  require(horizon >= 1 && channels >= 1, ErrorKind::kInvalidArgument,
          "error memory needs positive horizon and channel count");
  require(context_size >= 1, ErrorKind::kConfig, "context size must be >= 1");
  require(decay >= 0.0 && decay <= 1.0, ErrorKind::kConfig,
          "memory decay must lie in [0,1], got " + std::to_string(decay));
  template_ = Matrix::Zero(horizon, channels);
}

void ErrorMemory::update(std::span<const Matrix> batch_residuals) {
  if (batch_residuals.empty()) {
    ++empty_updates_;
    return;
  }
  Matrix batch_mean = Matrix::Zero(template_.rows(), template_.cols());
  for (const Matrix& r : batch_residuals) {
    require(r.rows() == template_.rows() && r.cols() == template_.cols(), ErrorKind::kDimension,
            "memory update: residual is " + std::to_string(r.rows()) + "x" +
                std::to_string(r.cols()) + ", memory is " + std::to_string(template_.rows()) +
                "x" + std::to_string(template_.cols()));
    require(r.allFinite(), ErrorKind::kNumerical, "memory update: non-finite residual");
    batch_mean += r;
  }
  batch_mean /= static_cast<double>(batch_residuals.size());

  template_ = decay_ * template_ + (1.0 - decay_) * batch_mean;

  ring_.push_back({batch_mean.mean(), batch_mean.cwiseAbs().mean()});
  while (static_cast<int>(ring_.size()) > context_size_) ring_.pop_front();
  ++version_;
}

Vector ErrorMemory::context_vector() const {
  Vector z = Vector::Zero(2 * context_size_);
  for (std::size_t i = 0; i < ring_.size(); ++i) {
    z(2 * i) = ring_[i].mean;
    z(2 * i + 1) = ring_[i].mean_abs;
  }
  return z;
}

ParamFile ErrorMemory::to_param_file() const {
  ParamFile file;
  file.kind = "error-memory";
  file.header = {{"horizon", horizon()},        {"channels", channels()},
                 {"context_size", context_size_}, {"decay", decay_},
                 {"version", version_},          {"empty_updates", empty_updates_}};
  Matrix ring(static_cast<Eigen::Index>(ring_.size()), 2);
  for (std::size_t i = 0; i < ring_.size(); ++i) {
    ring(static_cast<Eigen::Index>(i), 0) = ring_[i].mean;
    ring(static_cast<Eigen::Index>(i), 1) = ring_[i].mean_abs;
  }
  file.blocks = {{"template", template_}, {"context_ring", ring}};
  return file;
}

ErrorMemory ErrorMemory::from_param_file(const ParamFile& file) {
  require(file.kind == "error-memory", ErrorKind::kData,
          "expected an error-memory snapshot, got '" + file.kind + "'");
  const auto& h = file.header;
  ErrorMemory memory(h.at("horizon").get<int>(), h.at("channels").get<int>(),
                     h.at("context_size").get<int>(), h.at("decay").get<double>());
  const Matrix& templ = file.block("template");
  require(templ.rows() == memory.horizon() && templ.cols() == memory.channels(),
          ErrorKind::kData, "memory snapshot template shape disagrees with its header");
  memory.template_ = templ;
  const Matrix& ring = file.block("context_ring");
  require(ring.cols() == 2 && ring.rows() <= memory.context_size_, ErrorKind::kData,
          "memory snapshot context ring is malformed");
  for (Eigen::Index i = 0; i < ring.rows(); ++i) memory.ring_.push_back({ring(i, 0), ring(i, 1)});
  memory.version_ = h.at("version").get<std::int64_t>();
  memory.empty_updates_ = h.value("empty_updates", std::int64_t{0});
  return memory;
}

}  // namespace steps
