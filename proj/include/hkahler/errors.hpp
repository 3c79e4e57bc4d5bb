#pragma once

#include <stdexcept>
#include <string>

namespace hkahler {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Singular or branch-cut argument to ln/pow/div inside a jet computation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Lexing or parsing failure; carries the 1-based source position.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// A parameter reference with no entry in the parameter table.
class BindError : public Error {
public:
    using Error::Error;
};

/// Metric (or Sinyukov tensor) determinant below the degeneracy threshold.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// Potential is not real-valued at the evaluation point.
class RealityError : public Error {
public:
    using Error::Error;
};

/// Potential is outside the generalized-equidistant class required by the H-projective layer.
class NotInFamilyError : public Error {
public:
    using Error::Error;
};

/// A family specification violates its invariants.
class FamilyError : public Error {
public:
    using Error::Error;
};

}  // namespace hkahler
