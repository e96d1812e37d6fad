#pragma once

#include <stdexcept>
#include <string>

namespace conslearn {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong dimensions, non-finite values, out-of-range knobs.
class InputError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration, e.g. a model fed data in the wrong normalization.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operation applied to an object in the wrong state (noise added twice, ...).
class StateError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-finite loss or gradient, singular linear solve.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Alignment term hit a degenerate batch (zero spread in f or in the target energy).
class AlignmentDegenerateError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A requested normalization cannot be computed (constant dimension).
class NormalizationError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined on the given inputs (zero variance, length mismatch aside).
class DegenerateMetricError : public Error {
public:
    using Error::Error;
};

/// Adaptive integration gave up; reports how far it got.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_good_time)
        : Error(what), last_good_time(last_good_time) {}

    double last_good_time;
};

/// File format violations and I/O failures.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace conslearn
