#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adcast {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied input that violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A requested entity (advertiser, model, artifact) does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during fitting (divergence, non-convergence).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed text input; carries the 1-based line number of the offending row.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace adcast
