#pragma once

#include <stdexcept>
#include <string>

namespace mtsvm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data is structurally unusable (empty task, mismatched dims, ...).
struct InvalidDataset : Error {
  using Error::Error;
};

// A computation left the numeric domain we can vouch for (non-finite
// features, Gram matrix not PSD within tolerance, ...).
struct NumericError : Error {
  using Error::Error;
};

// Exponent outside [1, +inf].
struct InvalidExponent : Error {
  using Error::Error;
};

// An operation requires an exponent range we deliberately do not support.
struct UnsupportedExponent : Error {
  using Error::Error;
};

// A direction/weight vector that must be nonzero is all zeros.
struct ZeroVector : Error {
  using Error::Error;
};

// A task whose labels contain a single class.
struct DegenerateTask : Error {
  using Error::Error;
};

// Task index out of range for a model or dataset.
struct InvalidTask : Error {
  using Error::Error;
};

// Malformed CSV/JSON input; message carries the line or key.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace mtsvm
