#pragma once

#include <stdexcept>
#include <string>

namespace affect_forge {

/// Tensor dimensions do not line up for the requested operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input text. Carries the 1-based line number when one applies.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A name (event, tile) that is not part of the active schema or palette.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weights file produced under a different architecture or palette.
class IncompatibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weights file failed integrity verification.
class ChecksumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Spearman correlation requested on an input with zero variance.
class UndefinedCorrelationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace affect_forge
