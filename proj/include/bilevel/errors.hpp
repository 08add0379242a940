// SPDX-License-Identifier: Apache-2.0
//
// Error hierarchy shared by all modules. Every error carries a stable,
// machine-readable kind() so callers (CLI, tests) can branch without
// string-matching the message.
#pragma once

#include <stdexcept>
#include <string>

namespace bilevel {

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// setreal: an operation would produce or consume an empty set.
class EmptySetError : public Error {
 public:
  explicit EmptySetError(const std::string& message)
      : Error("EmptySet", message) {}
};

// setreal: malformed interval data (lo > hi, closed infinite endpoint, NaN).
class SetFormError : public Error {
 public:
  explicit SetFormError(const std::string& message)
      : Error("SetForm", message) {}
};

// expr/setreal: text did not match the grammar. Byte span of the offending
// token plus the token kinds that would have been accepted there.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t begin, std::size_t end,
             std::string expected = {})
      : Error("Parse", message), begin_(begin), end_(end),
        expected_(std::move(expected)) {}
  std::size_t begin() const { return begin_; }
  std::size_t end() const { return end_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t begin_, end_;
  std::string expected_;
};

// expr: evaluation hit an undefined operation (division by zero, NaN).
class EvalError : public Error {
 public:
  EvalError(const std::string& message, std::size_t begin, std::size_t end)
      : Error("Eval", message), begin_(begin), end_(end) {}
  std::size_t begin() const { return begin_; }
  std::size_t end() const { return end_; }

 private:
  std::size_t begin_, end_;
};

// expr: a variable in the expression has no value bound.
class BindError : public Error {
 public:
  explicit BindError(const std::string& name)
      : Error("Bind", "unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// model: problem file violates the schema; carries file/line location.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& file, int line, const std::string& message)
      : Error("Schema", file.empty()
                            ? "line " + std::to_string(line) + ": " + message
                            : file + ":" + std::to_string(line) + ": " + message),
        file_(file), line_(line) {}
  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

// model/lower: the follower's feasible set at some leader point is empty.
class InfeasibleFollowerError : public Error {
 public:
  explicit InfeasibleFollowerError(const std::string& at)
      : Error("InfeasibleFollower", "follower problem infeasible at x = " + at) {}
};

// lower: no declared solution-map piece covers the leader point.
class NoPsiPieceError : public Error {
 public:
  explicit NoPsiPieceError(const std::string& at)
      : Error("NoPsiPiece", "no solution-map piece covers x = " + at) {}
};

// lower: the upper objective is not classifiable as monotone on a piece.
class NonMonotonePieceError : public Error {
 public:
  explicit NonMonotonePieceError(const std::string& detail)
      : Error("NonMonotonePiece", detail) {}
};

// lower: the follower objective is unbounded below, so argmin is undefined.
class UnboundedLowerError : public Error {
 public:
  explicit UnboundedLowerError(const std::string& at)
      : Error("UnboundedLower",
              "follower objective unbounded below at x = " + at) {}
};

}  // namespace bilevel
