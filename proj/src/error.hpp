#pragma once

#include <stdexcept>
#include <string>

namespace cst {

enum class ErrorCode {
  invalid_argument,
  io,
  parse,
  validation,
  divergence,
  transport,
  partial,
  internal,
};

const char* to_string(ErrorCode code);

// Every failure raised by the core carries a category so the C API can map
// it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cst
