#include "ally/error.hpp"

namespace ally {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::input: return "input error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::contract: return "contract error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

}  // namespace ally
