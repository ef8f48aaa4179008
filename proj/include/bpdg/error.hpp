#pragma once

#include <stdexcept>
#include <string>

namespace bpdg {

// Root of every failure raised by the library. Callers that only need a
// diagnostic can catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Velocity points away from the target on some axis.
class InfeasibleAxis : public Error {
 public:
  using Error::Error;
};

// Zero initial velocity with a target that is not the initial position.
class DegenerateAxis : public Error {
 public:
  using Error::Error;
};

class NoEquilibria : public Error {
 public:
  using Error::Error;
};

class NoInteriorExtremum : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a closed-form expression (atanh, sqrt).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Settling tolerance outside the range where the settling-time formula holds.
class InvalidBound : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Carries the dotted path of the offending field, e.g. "axes.z.epsilon".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class FuelDepleted : public Error {
 public:
  using Error::Error;
};

}  // namespace bpdg
