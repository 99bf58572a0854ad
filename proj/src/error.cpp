#include "error.hpp"

namespace cst {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::validation: return "validation error";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::transport: return "transport error";
    case ErrorCode::partial: return "partial failure";
    case ErrorCode::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace cst
