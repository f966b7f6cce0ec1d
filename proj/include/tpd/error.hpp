#pragma once

#include <stdexcept>
#include <string>

namespace tpd {

enum class ErrorKind {
  Domain,      // time or parameter outside its valid range
  Shape,       // tensor shape / divisibility mismatch
  Input,       // malformed argument (non-square matrix, NaN, empty set)
  StageWidth,  // zero-width stage
  Endpoint,    // schedule endpoint singularity (gamma or sigma ~ 0)
  Numerical,   // NaN loss, quadrature non-convergence
  Config,
  Io,
  Verify,
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

}  // namespace tpd
