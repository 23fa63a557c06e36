#pragma once

#include <stdexcept>
#include <string>

namespace ally {

enum class ErrorKind {
  config,    // bad configuration key/value
  input,     // invalid argument or precondition
  shape,     // dimension mismatch
  parse,     // malformed file contents
  numeric,   // non-finite values
  contract,  // API misuse (stale cache, etc.)
  io,        // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace ally
