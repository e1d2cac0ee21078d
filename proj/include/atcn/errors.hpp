#pragma once

#include <stdexcept>
#include <string>

namespace atcn {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError/RangeError/ShapeError -> 1, DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct StateError : Error {
    using Error::Error;
};

}  // namespace atcn
