#pragma once

#include <stdexcept>
#include <string>

namespace fleetwise {

/// Bad schema, mismatched dimensions, invalid configuration.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File not found, unreadable, unparseable.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss or other numerical breakdown.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fleetwise
