#pragma once

#include <stdexcept>
#include <string>

namespace cgvamp {

enum class ErrorCode {
  invalid_arg,
  shape,
  parse,
  numeric,
  degenerate,
  io,
  internal,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

} // namespace cgvamp
