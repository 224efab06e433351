#include "steps/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "steps/errors.hpp"

namespace steps {

MissingPolicy missing_policy_from_string(const std::string& name) {
  if (name == "drop-row") return MissingPolicy::kDropRow;
  if (name == "forward-fill") return MissingPolicy::kForwardFill;
  fail(ErrorKind::kConfig, "unknown missing-value policy '" + name + "'");
}

const char* to_string(MissingPolicy policy) noexcept {
  return policy == MissingPolicy::kDropRow ? "drop-row" : "forward-fill";
}

Eigen::Index Dataset::split_begin(Split s) const noexcept {
  switch (s) {
    case Split::kTrain: return 0;
    case Split::kValidation: return split.train_end;
    case Split::kTest: return split.val_end;
  }
  return 0;
}

Eigen::Index Dataset::split_end(Split s) const noexcept {
  switch (s) {
    case Split::kTrain: return split.train_end;
    case Split::kValidation: return split.val_end;
    case Split::kTest: return split.test_end;
  }
  return 0;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& name, MissingPolicy policy) {
  Dataset data;
  data.name = name;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  require(!header.empty(), ErrorKind::kData, name + ": empty file");

  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<std::size_t> row_lines;
  std::optional<bool> has_timestamp;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    require(fields.size() == header.size(), ErrorKind::kData,
            name + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                " fields, found " + std::to_string(fields.size()));
    if (!has_timestamp) has_timestamp = !parse_number(fields.front()).has_value();
    const std::size_t first = *has_timestamp ? 1 : 0;
    if (*has_timestamp) data.timestamps.push_back(fields.front());
    std::vector<std::optional<double>> values;
    for (std::size_t i = first; i < fields.size(); ++i) values.push_back(parse_number(fields[i]));
    rows.push_back(std::move(values));
    row_lines.push_back(line_no);
  }
  require(!rows.empty(), ErrorKind::kData, name + ": no data rows");
  require(rows.front().size() >= 1, ErrorKind::kData, name + ": no numeric channels");
  const std::size_t first = *has_timestamp ? 1 : 0;
  data.channel_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());

  std::vector<std::vector<double>> kept;
  std::vector<std::string> kept_stamps;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<double> out(rows[r].size());
    bool drop = false;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (rows[r][c]) {
        out[c] = *rows[r][c];
      } else if (policy == MissingPolicy::kForwardFill && !kept.empty()) {
        out[c] = kept.back()[c];
        data.warnings.push_back(name + ":" + std::to_string(row_lines[r]) + ": forward-filled '" +
                                data.channel_names[c] + "'");
      } else {
        drop = true;
      }
    }
    if (drop) {
      data.warnings.push_back(name + ":" + std::to_string(row_lines[r]) +
                              ": dropped row with a missing or non-numeric value");
      continue;
    }
    kept.push_back(std::move(out));
    if (*has_timestamp) kept_stamps.push_back(data.timestamps[r]);
  }
  require(!kept.empty(), ErrorKind::kData, name + ": every row was dropped");
  data.timestamps = std::move(kept_stamps);

  data.values.resize(static_cast<Eigen::Index>(kept.size()),
                     static_cast<Eigen::Index>(kept.front().size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    for (std::size_t c = 0; c < kept[r].size(); ++c) {
      data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = kept[r][c];
    }
  }
  data.split = {data.rows(), data.rows(), data.rows()};
  return data;
}

Dataset load_csv(const std::filesystem::path& path, MissingPolicy policy) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kData, "cannot open dataset " + path.string());
  return parse_csv(in, path.stem().string(), policy);
}

Dataset split_dataset(Dataset data, const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    require(r > 0.0, ErrorKind::kConfig, "split ratios must be positive");
    sum += r;
  }
  require(sum <= 1.0 + 1e-12, ErrorKind::kConfig, "split ratios must sum to at most 1");
  const double t = static_cast<double>(data.rows());
  // The small epsilon keeps 0.7 * 1000 at 700 rather than 699.
  auto at = [t](double fraction) { return static_cast<Eigen::Index>(std::floor(t * fraction + 1e-9)); };
  data.split.train_end = at(ratios[0]);
  data.split.val_end = at(ratios[0] + ratios[1]);
  data.split.test_end = std::min(data.rows(), at(sum));
  return data;
}

Dataset split_dataset_ett(Dataset data, bool fifteen_minute) {
  const Eigen::Index month = 30 * 24 * (fifteen_minute ? 4 : 1);
  data.split.train_end = 12 * month;
  data.split.val_end = 16 * month;
  data.split.test_end = 20 * month;
  require(data.rows() >= data.split.test_end, ErrorKind::kData,
          data.name + ": ETT preset needs " + std::to_string(data.split.test_end) + " rows, have " +
              std::to_string(data.rows()));
  return data;
}

void check_split_fits(const Dataset& data, int lookback, int horizon) {
  const Eigen::Index test_rows = data.split.test_end - data.split.val_end;
  require(test_rows >= lookback + horizon, ErrorKind::kData,
          data.name + ": test split has " + std::to_string(test_rows) +
              " rows, fewer than L + H = " + std::to_string(lookback + horizon));
}

std::vector<Eigen::Index> window_origins(const Dataset& data, Split split, int lookback,
                                         int horizon, int stride) {
  require(stride >= 1, ErrorKind::kConfig, "stride must be >= 1");
  std::vector<Eigen::Index> origins;
  const Eigen::Index begin = std::max<Eigen::Index>(data.split_begin(split), lookback);
  for (Eigen::Index o = begin; o + horizon <= data.split_end(split); o += stride) {
    origins.push_back(o);
  }
  return origins;
}

Standardizer Standardizer::fit(const Dataset& data) {
  require(data.split.train_end >= 2, ErrorKind::kData, "training split too small to standardize");
  const auto train = data.values.topRows(data.split.train_end);
  Standardizer s;
  s.mean = train.colwise().mean();
  s.stddev = ((train.rowwise() - s.mean).array().square().colwise().sum() /
              static_cast<double>(train.rows() - 1))
                 .sqrt();
  s.stddev = s.stddev.cwiseMax(1e-8);
  return s;
}

Matrix Standardizer::apply(const Matrix& values) const {
  return ((values.rowwise() - mean).array().rowwise() / stddev.array()).matrix();
}

Dataset standardize(const Dataset& data) {
  Dataset out = data;
  out.values = Standardizer::fit(data).apply(data.values);
  return out;
}

}  // namespace steps
