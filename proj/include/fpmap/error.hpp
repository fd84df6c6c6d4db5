#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpmap {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Landmark graph whose declared edge geometry disagrees with its node coordinates.
class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Persisted file whose structure does not match the expected schema/version.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fpmap
