#pragma once

#include <stdexcept>
#include <string>

namespace dsmap {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input rejected because its shape does not match the contract.
struct ShapeError : Error {
    using Error::Error;
};

/// A content code carried the wrong shared/domain-specific tag.
struct TagError : Error {
    using Error::Error;
};

/// Bad configuration value, unknown key, or invalid command usage.
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem or codec failure.
struct IoError : Error {
    using Error::Error;
};

/// Non-finite value or a numerical routine that failed to converge.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace dsmap
