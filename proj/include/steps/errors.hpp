#pragma once

#include <stdexcept>
#include <string>

namespace steps {

enum class ErrorKind {
  kInvalidArgument,  // bad operation argument (horizon, regularizer, ratio...)
  kDimension,        // shape mismatch between fields
  kConfig,           // configuration file or option error
  kData,             // dataset ingestion / split error
  kNumerical,        // NaN, divergence, singular system
  kContract,         // leakage or frozen-parameter breach
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

// Process exit code for the CLI: 2 config, 3 data, 4 contract violation.
int exit_code_for(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

}  // namespace steps
