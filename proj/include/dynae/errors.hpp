#pragma once

#include <stdexcept>
#include <string>

namespace dynae {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched or stale state, e.g. a forward cache used after a parameter update.
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A diagnostic that is undefined for the given inputs (zero gradient, missing labels, empty side).
struct UnavailableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dynae
