#pragma once

#include <stdexcept>
#include <string>

namespace ck {

// Error taxonomy used across the toolkit. All errors carry a message naming
// the offending quantity; callers catch the base type unless they need to
// distinguish.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape / dimension mismatches between tensors.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid parameter values (out-of-range scalars, bad config fields).
struct ParamError : Error {
    using Error::Error;
};

// Math domain violations (log of zero, division by an unsupported zero).
struct DomainError : Error {
    using Error::Error;
};

// API contract violations (backward on a non-scalar, detached loss).
struct ContractError : Error {
    using Error::Error;
};

// Malformed external data (files, boxes outside the image).
struct DataError : Error {
    using Error::Error;
};

// Inconsistent run configuration (missing checkpoint, wrong head type).
struct ConfigError : Error {
    using Error::Error;
};

// Runtime failures during training (NaN loss).
struct TrainError : Error {
    using Error::Error;
};

// Evaluation failures (no class with a defined AP).
struct EvalError : Error {
    using Error::Error;
};

// Timing failures during benchmarking.
struct MeasureError : Error {
    using Error::Error;
};

}  // namespace ck
