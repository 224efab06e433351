#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "steps/types.hpp"

namespace steps {

enum class MissingPolicy { kDropRow, kForwardFill };

MissingPolicy missing_policy_from_string(const std::string& name);
const char* to_string(MissingPolicy policy) noexcept;

/// Chronological split: [0, train_end) train, [train_end, val_end) val,
/// [val_end, test_end) test.
struct SplitBounds {
  Eigen::Index train_end = 0;
  Eigen::Index val_end = 0;
  Eigen::Index test_end = 0;
};

enum class Split { kTrain, kValidation, kTest };

struct Dataset {
  std::string name;
  Matrix values;  // T x d
  std::vector<std::string> timestamps;
  std::vector<std::string> channel_names;
  SplitBounds split;
  std::vector<std::string> warnings;

  Eigen::Index rows() const noexcept { return values.rows(); }
  int channels() const noexcept { return static_cast<int>(values.cols()); }
  Eigen::Index split_begin(Split s) const noexcept;
  Eigen::Index split_end(Split s) const noexcept;
};

/// Reads a CSV whose first row is a header. A first column that does not
/// parse as a number is taken as the timestamp. Missing or non-numeric cells
/// are handled by `policy`; rows with the wrong field count are errors.
Dataset load_csv(const std::filesystem::path& path, MissingPolicy policy);
Dataset parse_csv(std::istream& in, const std::string& name, MissingPolicy policy);

/// Ratio split (train, val, test); positive ratios with sum <= 1.
Dataset split_dataset(Dataset data, const std::array<double, 3>& ratios);

/// Conventional ETT preset: 12/4/4 months of hourly rows (x4 for 15-minute).
Dataset split_dataset_ett(Dataset data, bool fifteen_minute);

/// Refuses splits whose test part cannot hold one lookback plus horizon.
void check_split_fits(const Dataset& data, int lookback, int horizon);

/// Window origins (index of the first target row) whose targets lie inside
/// `split` and whose lookback is available, in chronological order.
std::vector<Eigen::Index> window_origins(const Dataset& data, Split split, int lookback,
                                         int horizon, int stride);

/// Per-channel mean / std of the training split.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;

  static Standardizer fit(const Dataset& data);
  Matrix apply(const Matrix& values) const;
};

/// Standardizes every row with training-split statistics.
Dataset standardize(const Dataset& data);

}  // namespace steps
