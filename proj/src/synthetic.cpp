#include "steps/synthetic.hpp"

#include <cmath>
#include <string>

#include "steps/errors.hpp"
#include "steps/rng.hpp"

namespace steps {

Dataset make_seasonal_stream(const SeasonalStreamSpec& spec) {
  require(spec.length >= 1 && spec.channels >= 1, ErrorKind::kInvalidArgument,
          "synthetic stream needs positive length and channels");
  require(spec.periods.size() == spec.amplitudes.size(), ErrorKind::kInvalidArgument,
          "one amplitude per period");
  Rng rng(spec.seed);
  Dataset data;
  data.name = "synthetic-seasonal";
  data.values.resize(spec.length, spec.channels);
  for (int c = 0; c < spec.channels; ++c) {
    data.channel_names.push_back("ch" + std::to_string(c));
    std::vector<double> phase(spec.periods.size());
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);
    double level = 0.0;
    for (Eigen::Index t = 0; t < spec.length; ++t) {
      double v = level;
      for (std::size_t k = 0; k < spec.periods.size(); ++k) {
        v += spec.amplitudes[k] * std::sin(2.0 * M_PI * static_cast<double>(t) / spec.periods[k] + phase[k]);
      }
      data.values(t, c) = v + spec.noise * rng.normal();
      level += spec.level_walk * rng.normal();
    }
  }
  data.split = {spec.length, spec.length, spec.length};
  return data;
}

}  // namespace steps
