#pragma once

#include <stdexcept>
#include <string>

namespace longrisk {

// Coarse category used by the CLI to pick an exit code:
//   usage -> 1, data -> 2, numeric -> 3.
enum class ErrorKind { usage, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Tensor shape / dimension mismatches.
struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

// API contract violations (non-scalar loss, consumed graph, bad slot, ...).
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

// Invalid configuration values (bad probabilities, odd widths, empty grids).
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::usage, m) {}
};

// Malformed input files; message carries file/line context.
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorKind::data, m) {}
};

// Structurally valid input that violates a domain invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorKind::data, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::data, m) {}
};

struct SplitError : Error {
  explicit SplitError(const std::string& m) : Error(ErrorKind::data, m) {}
};

// Loss-weight computation found a follow-up year with no known labels.
struct WeightingError : Error {
  explicit WeightingError(const std::string& m) : Error(ErrorKind::data, m) {}
};

// A metric is undefined on its input (single-class set, no comparable pairs).
struct MetricError : Error {
  explicit MetricError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

// Softmax lane (or attention row) with every position masked out.
struct InvalidMaskError : Error {
  explicit InvalidMaskError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

// Numerical failure during optimization (NaN loss and friends).
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

// Operation not available for the given payload mode (e.g. pixel saliency
// on a precomputed-embedding cohort).
struct UnsupportedModeError : Error {
  explicit UnsupportedModeError(const std::string& m) : Error(ErrorKind::data, m) {}
};

}  // namespace longrisk
