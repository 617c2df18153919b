#pragma once

#include <stdexcept>
#include <string>

namespace zsl {

/// Base class for every failure raised by the toolkit. The message is a
/// one-line diagnostic suitable for printing verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace zsl
