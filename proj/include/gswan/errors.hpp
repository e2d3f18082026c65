#pragma once

#include <stdexcept>
#include <string>

namespace gswan {

// Bad run configuration (model/training/CLI): maps to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries file name and line number.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required: maps to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gswan
