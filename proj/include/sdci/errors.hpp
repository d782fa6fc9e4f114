#pragma once

#include <stdexcept>
#include <string>

namespace sdci {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible (message names both shapes).
struct ShapeError : Error {
    using Error::Error;
};

// A parameter value is outside its valid range.
struct ValueError : Error {
    using Error::Error;
};

// A documented precondition of an operation was violated.
struct ContractError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace sdci
