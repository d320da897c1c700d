#pragma once

#include <stdexcept>
#include <string>

namespace subdivnet {

/// Base class for all recoverable domain errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input violates a topological precondition (non-manifold, no subdivision connectivity, ...).
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Tensor, buffer or index dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace subdivnet
