#pragma once

#include <stdexcept>

namespace mcoh {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 1, data_error -> 2, numerical_error -> 3.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mcoh
