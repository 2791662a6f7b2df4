#pragma once

#include <stdexcept>
#include <string>

namespace qflair {

// Invalid configuration or arguments (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unusable input data (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure during model training (CLI exit code 3).
class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qflair
