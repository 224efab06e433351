#include "steps/errors.hpp"

namespace steps {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kDimension:
    case ErrorKind::kData:
    case ErrorKind::kNumerical:
      return 3;
    case ErrorKind::kContract:
      return 4;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kContract: return "contract-violation";
  }
  return "unknown";
}

}  // namespace steps
