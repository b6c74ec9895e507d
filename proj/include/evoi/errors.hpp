#pragma once

#include <stdexcept>

namespace evoi {

/// Invalid configuration: unknown environment, illegal method parameter, bad
/// environment/method combination. The CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be read, written or decoded. The CLI maps it to exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace evoi
