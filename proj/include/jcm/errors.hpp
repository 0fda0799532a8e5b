#pragma once

#include <stdexcept>

namespace jcm {

// Invalid or inconsistent experiment configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure during a run (CLI exit code 2).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The Fock-space cutoff cannot represent the requested state.
struct TruncationError : NumericError {
  using NumericError::NumericError;
};

// A windowed estimate found fewer extrema than it needs.
struct InsufficientExtrema : NumericError {
  using NumericError::NumericError;
};

}  // namespace jcm
