#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tensorsmooth {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Evaluation point outside the basis domain.  Carries the offending
/// observation rows when raised by prediction.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what, std::vector<std::size_t> rows = {})
        : Error(what), rows_(std::move(rows)) {}
    const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DuplicateKnotError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class OrderTooHighError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class PreconditionerError : public Error {
public:
    using Error::Error;
};

class TraceEstimationError : public Error {
public:
    TraceEstimationError(const std::string& what, std::size_t probe)
        : Error(what), probe_(probe) {}
    std::size_t probe_index() const noexcept { return probe_; }

private:
    std::size_t probe_;
};

/// The smoothing-parameter iteration has no interior optimum (for example
/// the coefficients lie in the penalty null space).
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    using Error::Error;
};

/// Response values or table contents that the model cannot accept.
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tensorsmooth
