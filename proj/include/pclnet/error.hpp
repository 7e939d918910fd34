#pragma once

#include <stdexcept>
#include <string>

namespace pclnet {

enum class ErrorKind {
  invalid_argument,
  io,
  format,
  numeric,
  state,
};

// All library failures are reported as pclnet::Error; the C API maps kind()
// onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::invalid_argument, message);
}

}  // namespace pclnet
