#pragma once

#include <stdexcept>
#include <string>

namespace mf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a numerical breakdown.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A Hilbert-space dimension exceeds the configured oracle cap.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mf
