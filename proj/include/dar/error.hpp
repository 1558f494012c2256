#pragma once

#include <stdexcept>
#include <string>

namespace dar {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a training step produces a non-finite loss. Training halts.
class TrainingHalted : public Error {
public:
    using Error::Error;
};

}  // namespace dar
