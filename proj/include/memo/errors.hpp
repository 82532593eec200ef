#pragma once

#include <stdexcept>
#include <string>

namespace memo {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimensionality violations anywhere in the numeric stack.
struct DimensionError : Error {
    using Error::Error;
};

// A forward tape was consumed twice or its parameters changed underneath it.
struct StaleTapeError : Error {
    using Error::Error;
};

struct MorphologyError : Error {
    using Error::Error;
};
struct OverlapError : MorphologyError {
    using MorphologyError::MorphologyError;
};
struct CoverageError : MorphologyError {
    using MorphologyError::MorphologyError;
};
struct ArityError : MorphologyError {
    using MorphologyError::MorphologyError;
};

struct NumericalError : Error {
    using Error::Error;
};

struct TrainingDiverged : Error {
    using Error::Error;
};

// IL distillation missed the required fraction of the expert's reward.
struct ValidationFailure : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};
struct UnknownKeyError : ConfigError {
    using ConfigError::ConfigError;
};
struct MissingKeyError : ConfigError {
    using ConfigError::ConfigError;
};

struct IoError : Error {
    using Error::Error;
};
struct CorruptFile : IoError {
    using IoError::IoError;
};
struct VersionMismatch : IoError {
    using IoError::IoError;
};

struct TypeMismatch : Error {
    using Error::Error;
};
struct ArityMismatch : Error {
    using Error::Error;
};

struct MissingPrerequisite : Error {
    using Error::Error;
};

struct AggregationError : Error {
    using Error::Error;
};

}  // namespace memo
