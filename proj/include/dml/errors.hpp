#pragma once

#include <stdexcept>
#include <string>

namespace dml {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid inputs, configuration, or data (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failures during estimation or sampling (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IngestionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class AuditError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RankError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

class EstimationError : public NumericError {
public:
    using NumericError::NumericError;
};

class EvaluationError : public NumericError {
public:
    using NumericError::NumericError;
};

class FactorizationError : public NumericError {
public:
    using NumericError::NumericError;
};

class DegenerateScoreError : public NumericError {
public:
    using NumericError::NumericError;
};

class RangeError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace dml
