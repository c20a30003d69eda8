#pragma once

#include <stdexcept>
#include <string>

namespace rkgs {

/// Invalid input shapes, flags, or solver/regime pairings. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Malformed system files. Carries the file and 1-based line in the message.
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Singular Gram matrices, eigensolver non-convergence, vacuous bounds. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace rkgs
