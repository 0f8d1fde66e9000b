#pragma once

#include <stdexcept>
#include <string>

namespace rsrae {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced or supplied, divergence, failed decomposition.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid user-supplied configuration or argument.
class ConfigError : public Error {
public:
    using Error::Error;
};

// File parsing and I/O failures.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rsrae
