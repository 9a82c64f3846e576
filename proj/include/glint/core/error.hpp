#pragma once

#include <stdexcept>
#include <string>

namespace glint {

// Domain errors carry a stable module-qualified code so the CLI can print
// them uniformly and tests can match on category rather than message text.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};
struct CapabilityError : Error {
    explicit CapabilityError(const std::string& msg) : Error("capability", msg) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data", msg) {}
};
struct InputError : Error {
    explicit InputError(const std::string& msg) : Error("input", msg) {}
};
struct ProtocolError : Error {
    explicit ProtocolError(const std::string& msg) : Error("protocol", msg) {}
};
struct InitError : Error {
    explicit InitError(const std::string& msg) : Error("init", msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

}  // namespace glint
