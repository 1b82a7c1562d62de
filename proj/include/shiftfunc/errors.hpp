#pragma once

#include <stdexcept>
#include <string>

namespace shiftfunc {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 2, capability_error -> 3, numerical_error -> 4.

// Malformed or out-of-range configuration values (bad covariance matrix,
// n_rep too small, unknown enum tags, schema violations).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A requested operation is not supported by the given objects: missing
// gradient or derivative forms, chain order above the cost cap, unsupported
// norm context for a model kind.
class capability_error : public std::runtime_error {
 public:
  explicit capability_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failures: factorization breakdown, spectral function
// domain violations, packing construction failure.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace shiftfunc
