#include "steps/param_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "steps/errors.hpp"

namespace steps {

static_assert(std::endian::native == std::endian::little,
              "parameter files are written in little-endian byte order");

namespace {

constexpr char kMagic[8] = {'S', 'T', 'E', 'P', 'S', 'P', 'A', 'R'};

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  require(pos + 4 <= in.size(), ErrorKind::kData, "parameter file truncated");
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

const Matrix& ParamFile::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b.values;
  }
  fail(ErrorKind::kData, "parameter file of kind '" + kind + "' has no block '" + name + "'");
}

std::string encode_param_file(const ParamFile& file) {
  nlohmann::json header = file.header;
  header["kind"] = file.kind;
  auto table = nlohmann::json::array();
  for (const auto& b : file.blocks) {
    table.push_back({{"name", b.name}, {"rows", b.values.rows()}, {"cols", b.values.cols()}});
  }
  header["blocks"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, ParamFile::kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& b : file.blocks) {
    for (Eigen::Index r = 0; r < b.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.values.cols(); ++c) {
        const double v = b.values(r, c);
        char buf[8];
        std::memcpy(buf, &v, 8);
        out.append(buf, 8);
      }
    }
  }
  return out;
}

ParamFile decode_param_file(const std::string& bytes) {
  require(bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0,
          ErrorKind::kData, "not a STEPS parameter file (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const std::uint32_t version = get_u32(bytes, pos);
  require(version == ParamFile::kFormatVersion, ErrorKind::kData,
          "unsupported parameter file version " + std::to_string(version));
  const std::uint32_t header_len = get_u32(bytes, pos);
  require(pos + header_len <= bytes.size(), ErrorKind::kData, "parameter file header truncated");

  ParamFile file;
  try {
    file.header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("parameter file header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  file.kind = file.header.value("kind", "");
  for (const auto& entry : file.header.at("blocks")) {
    ParamBlock b;
    b.name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    require(rows >= 0 && cols >= 0, ErrorKind::kData, "negative block shape");
    const std::size_t need = static_cast<std::size_t>(rows * cols) * 8;
    require(pos + need <= bytes.size(), ErrorKind::kData, "parameter block '" + b.name + "' truncated");
    b.values.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::memcpy(&b.values(r, c), bytes.data() + pos, 8);
        pos += 8;
      }
    }
    file.blocks.push_back(std::move(b));
  }
  require(pos == bytes.size(), ErrorKind::kData, "trailing bytes after parameter blocks");
  file.header.erase("blocks");
  file.header.erase("kind");
  return file;
}

void write_param_file(const std::filesystem::path& path, const ParamFile& file) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kData, "cannot open " + path.string() + " for writing");
  const std::string bytes = encode_param_file(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::kData, "failed writing " + path.string());
}

ParamFile read_param_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kData, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_param_file(buffer.str());
}

std::uint64_t digest_matrices(std::initializer_list<const Matrix*> matrices) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&hash](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ULL;
    }
  };
  for (const Matrix* m : matrices) {
    const Eigen::Index shape[2] = {m->rows(), m->cols()};
    mix(shape, sizeof(shape));
    mix(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  return hash;
}

}  // namespace steps
