#pragma once

#include <stdexcept>
#include <string>

namespace krst {

// Base class for all library errors. Subclasses map onto CLI exit codes:
// ConfigError/DimError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or dimension mismatch between tensors.
class DimError : public Error {
public:
    explicit DimError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value or unusable parameter combination.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad input data: unreadable files, unknown tokens, corrupt checkpoints.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace krst
