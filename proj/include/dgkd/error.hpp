#pragma once

#include <stdexcept>
#include <string>

namespace dgkd {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument value (non-positive temperature, out-of-range label, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Shape or graph-structure mismatch.
struct StructuralError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Capacity ladder violations (ties, wrong ordering, trainer not larger).
struct LadderError : Error {
  using Error::Error;
};

// Experiment configuration problems; message carries the offending key path.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed dataset files (bad magic, truncation, count/size/label-range).
struct DataFormatError : Error {
  using Error::Error;
};

// Corrupt or version-mismatched checkpoint files.
struct CheckpointError : Error {
  using Error::Error;
};

// Training aborted on a non-finite loss.
struct TrainingDivergence : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dgkd
