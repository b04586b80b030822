#pragma once

#include <stdexcept>
#include <string>

namespace ednn {

/// Base class for all library errors. Carries a short category tag so
/// callers (and the CLI) can report structured failures.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(category + ": " + message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape-mismatch", msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("bad-config", msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error("bad-format", msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error("divergence", msg) {}
};

struct GenerationError : Error {
    explicit GenerationError(const std::string& msg) : Error("generation", msg) {}
};

struct BoundsError : Error {
    explicit BoundsError(const std::string& msg) : Error("out-of-bounds", msg) {}
};

}  // namespace ednn
