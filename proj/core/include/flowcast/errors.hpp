#pragma once

#include <stdexcept>
#include <string>

namespace flowcast {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to an operation's rule.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (log of 0, alpha outside (0,1), ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or a broken numerical invariant during computation.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace flowcast
