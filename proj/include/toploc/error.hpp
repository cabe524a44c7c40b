#pragma once

#include <stdexcept>
#include <string>

namespace toploc {

// Base for all recoverable toploc failures.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument / configuration supplied by the caller.
struct ParamError : Error {
    explicit ParamError(const std::string& msg) : Error(msg) {}
};

// Malformed, truncated or otherwise unusable input data (files, logs, maps).
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Graph has unconstrained gauge freedom.
struct GaugeError : Error {
    explicit GaugeError(const std::string& msg) : Error(msg) {}
};

}  // namespace toploc
