#pragma once

#include <stdexcept>
#include <string>

namespace wpad {

// Exception taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shape/rank violations (messages name the offending shapes).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad configuration: invalid hyperparameters, malformed config files,
// unknown keys, architecture constraints that cannot be met.
class ConfigError : public Error {
public:
    using Error::Error;
};

// I/O and format problems: unreadable images, bad checkpoints, empty classes.
class DataError : public Error {
public:
    using Error::Error;
};

// Numeric aborts, e.g. NaN loss during training.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace wpad
