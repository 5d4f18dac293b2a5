#pragma once

#include <stdexcept>
#include <string>

namespace hybridet {

// Base class for everything the library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration, malformed input files, violated preconditions.
// The CLI maps this to exit code 2; every other failure maps to 1.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace hybridet
