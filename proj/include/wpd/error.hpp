#pragma once

#include <stdexcept>
#include <string>

namespace wpd {

enum class ErrorKind {
  InvalidArgument,  // bad config / precondition violation
  Parse,            // malformed input file
  NonConvergence,   // refinement did not reach the target band
  Io,               // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace wpd
