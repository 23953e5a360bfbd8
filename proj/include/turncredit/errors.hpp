#pragma once

#include <stdexcept>
#include <string>

namespace turncredit {

// Base class for all library errors. Subclasses map onto CLI exit codes:
// usage problems are caught by the CLI itself, data problems derive from
// Error, non-convergence is signalled by value (IrcResult), not thrown.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Structurally valid input that violates a data-model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Rollouts that disagree with their group (golden actions, task id).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Tool name not covered by the registry.
class ClassificationError : public Error {
public:
    using Error::Error;
};

// Group unusable for normalization (N < 2) or shape mismatch.
class EstimatorError : public Error {
public:
    using Error::Error;
};

// IRC cannot proceed on this buffer (e.g. anchor tier has no variance).
class CalibrationError : public Error {
public:
    using Error::Error;
};

// Bad arguments to a statistics routine (length mismatch, empty input).
class ArgumentError : public Error {
public:
    using Error::Error;
};

}  // namespace turncredit
