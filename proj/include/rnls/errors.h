#pragma once

#include <stdexcept>
#include <string>

namespace rnls {

// A residual evaluator produced a non-finite value (or signalled failure,
// e.g. a point behind the camera). Carries the offending residual block id.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(int residual_block_id, const std::string& what)
      : std::runtime_error(what), residual_block_id_(residual_block_id) {}
  int residual_block_id() const { return residual_block_id_; }

 private:
  int residual_block_id_;
};

// Requested half-quadratic machinery (kappa / lifted cost) on a kernel kind
// that has no closed-form bias function.
class NotLiftableError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Structurally well-formed input that violates a dataset invariant
// (index out of range, unreferenced camera, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rnls
