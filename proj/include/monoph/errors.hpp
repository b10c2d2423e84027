#pragma once

#include <stdexcept>
#include <string>

namespace monoph {

// Incompatible dimensions, layouts or block shapes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation invoked on an object that does not support it
// (e.g. feedback extraction on an open-loop state).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear or iterative solve failed.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested capability is not available for this object
// (e.g. implicit Euler on a non-affine flow).
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config parse/validation failure. `line` is 1-based, -1 if not tied to a line.
struct ValidationError : std::runtime_error {
  int line;
  explicit ValidationError(const std::string& msg, int line_no = -1)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

// State became non-finite while stepping.
struct DivergenceError : std::runtime_error {
  long step;
  DivergenceError(const std::string& msg, long step_index)
      : std::runtime_error(msg + " (step " + std::to_string(step_index) + ")"),
        step(step_index) {}
};

}  // namespace monoph
