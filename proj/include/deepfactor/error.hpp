#pragma once

#include <stdexcept>
#include <string>

namespace deepfactor {

enum class ErrorCode {
  InvalidArgument = 1,
  Parse = 2,
  Io = 3,
};

/// Exception type thrown by every module of the library. The C API maps the
/// code onto its status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, what);
}

[[noreturn]] inline void throw_parse(const std::string& what) {
  throw Error(ErrorCode::Parse, what);
}

[[noreturn]] inline void throw_io(const std::string& what) {
  throw Error(ErrorCode::Io, what);
}

}  // namespace deepfactor
