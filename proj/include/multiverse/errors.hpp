#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace multiverse {

/// Numeric failures: indefinite factorizations, diverging optimizations,
/// failed constructions. The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A factorization hit a zero or negative pivot.
class IndefiniteError : public NumericError {
public:
    IndefiniteError(const std::string& what, std::size_t pivot)
        : NumericError(what), pivot_(pivot) {}
    /// 1-based index of the offending pivot.
    std::size_t pivot() const { return pivot_; }

private:
    std::size_t pivot_ = 0;
};

/// Training objective became non-finite.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::size_t epoch)
        : NumericError(what), epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_ = 0;
};

/// An orthogonal-solution construction did not converge.
class ConstructionError : public NumericError {
public:
    ConstructionError(const std::string& what, std::size_t class_index)
        : NumericError(what), class_index_(class_index) {}
    std::size_t class_index() const { return class_index_; }

private:
    std::size_t class_index_ = 0;
};

/// A construction needs a quantity that is numerically zero.
class DegenerateError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A theorem check was called on inputs that violate its premise. Distinct
/// from a bound failure: the theorem makes no claim here.
class PremiseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data and IO failures (bad files, impossible splits). CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what), line_(line) {}
    /// 1-based line number.
    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

/// Structurally inconsistent input (column counts, empty schemas).
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// More pairs requested than distinct pairs exist.
class ExhaustionError : public DataError {
public:
    using DataError::DataError;
};

/// Invalid configuration or usage. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace multiverse
