#pragma once

#include <stdexcept>
#include <string>

namespace spikeloop {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

class StabilityError : public Error {
public:
    using Error::Error;
};

class InvalidStateError : public Error {
public:
    using Error::Error;
};

class CausalityError : public Error {
public:
    using Error::Error;
};

class MalformedWordError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

// Config parse/validation failure. `line` is 0 when the error is not tied to
// a source line (flag overrides, whole-config validation).
class ConfigError : public Error {
public:
    ConfigError(std::string key, int line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          key_(std::move(key)),
          line_(line)
    {
    }

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_ = 0;
};

} // namespace spikeloop
