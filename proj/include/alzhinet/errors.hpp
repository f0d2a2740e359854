#pragma once

#include <stdexcept>

namespace alzhinet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch between tensor arguments.
struct ShapeError : Error { using Error::Error; };
// Invalid parameter value (kernel <= 0, negative lambda, ...).
struct ParamError : Error { using Error::Error; };
// Bad run configuration (unknown key, single-class training set, ...).
struct ConfigError : Error { using Error::Error; };
// Data ingestion problems (missing directory, empty class, ...).
struct DataError : Error { using Error::Error; };
// Checkpoint format or manifest problems.
struct CheckpointError : Error { using Error::Error; };
// Autodiff contract violations (backward on non-scalar, consumed tape, ...).
struct ContractError : Error { using Error::Error; };
// Index out of range (class label outside [0, K), ...).
struct IndexError : Error { using Error::Error; };
// Non-finite values where finite ones are required.
struct NumericError : Error { using Error::Error; };

}  // namespace alzhinet
