#pragma once

#include <stdexcept>
#include <string>

namespace fishdip {

// Error taxonomy used across the library. The CLI maps config_error and
// contract_error to exit code 1 (caller mistakes) and everything else to 2.
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition (bad argument, mismatched sizes).
struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Object used in the wrong lifecycle phase (e.g. backward on a consumed tape).
struct state_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structured label inconsistent with its sentence or schema.
struct label_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sequence exceeds a model's maximum length.
struct length_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fishdip
