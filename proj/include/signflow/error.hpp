#pragma once

#include <stdexcept>
#include <string>

namespace signflow {

// Shape or dimension contract violated (both shapes named in the message).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside its documented domain (negative gamma, confidence > 1, ...).
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A forward op produced NaN/Inf. Treated as a hard error, never propagated.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data (dataset files, checkpoints).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mutually contradictory mode flags (e.g. streaming a joint-denoised sequence).
struct ModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace signflow
