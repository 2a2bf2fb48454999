#pragma once

#include <stdexcept>
#include <string>

namespace racmc {

// Shape disagreement between tensor operands. Message names both shapes.
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad hyperparameter, conflicting flags, dim mismatch
// between a snapshot and the requested model.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (embedding files, labels).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: calling backward on a non-scalar, stepping a parameter with no
// gradient, and similar caller-side contract breaches.
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace racmc
