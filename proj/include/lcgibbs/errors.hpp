#pragma once

#include <stdexcept>
#include <string>

namespace lcgibbs {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid object construction: non-SPD matrices, malformed maps, bad metadata.
struct ConstructionError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
// Non-finite or otherwise unusable inputs to an evaluator.
struct InputError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };

struct ConditionalSamplingError : Error { using Error::Error; };
struct HullViolationError : ConditionalSamplingError { using ConditionalSamplingError::ConditionalSamplingError; };
struct BracketError : ConditionalSamplingError { using ConditionalSamplingError::ConditionalSamplingError; };
struct ModeError : Error { using Error::Error; };

}  // namespace lcgibbs
