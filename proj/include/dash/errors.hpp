#pragma once

#include <stdexcept>
#include <string>

namespace dash {

enum class ErrorKind {
  InvalidArgument,   // precondition violated by the caller
  Data,              // malformed or inconsistent input data
  UnsupportedFormat, // recognised but unsupported input (e.g. TSPLIB GEO)
  TooLarge,          // instance exceeds an exact oracle's size limit
  Provider,          // mutation provider failed after retries
  Usage,             // command-line misuse
};

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

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace dash
