#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "steps/types.hpp"

namespace steps {

// Binary container shared by decoder, backbone and memory snapshots:
//
//   "STEPSPAR"            8-byte magic
//   u32 format version
//   u32 header length N, then N bytes of JSON (kind, fields, block table)
//   blocks in table order, each rows*cols little-endian f64, row-major
//
// Doubles are copied bit-for-bit, so a write/read round trip is exact.
struct ParamBlock {
  std::string name;
  Matrix values;
};

struct ParamFile {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string kind;
  nlohmann::json header = nlohmann::json::object();
  std::vector<ParamBlock> blocks;

  const Matrix& block(const std::string& name) const;
};

std::string encode_param_file(const ParamFile& file);
ParamFile decode_param_file(const std::string& bytes);

void write_param_file(const std::filesystem::path& path, const ParamFile& file);
ParamFile read_param_file(const std::filesystem::path& path);

/// FNV-1a over the raw bytes of every listed matrix (shape included).
std::uint64_t digest_matrices(std::initializer_list<const Matrix*> matrices);

}  // namespace steps
