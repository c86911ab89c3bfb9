#pragma once

#include <stdexcept>
#include <string>

namespace vdgr {

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  ConfigMismatch = 4,
  Numeric = 5,
  Skipped = 6,
  Internal = 7,
};

/// Every failure raised by the library carries one of the codes above so the C
/// boundary can map it to a status without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace vdgr
