#pragma once

#include <stdexcept>
#include <string>

namespace entropic {

/// Failure category, mapped onto process exit codes by the CLI:
/// input -> 1, numeric -> 2, internal -> 3.
enum class ErrorKind { input, numeric, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_input(const std::string& message) {
    throw Error(ErrorKind::input, message);
}

[[noreturn]] inline void throw_numeric(const std::string& message) {
    throw Error(ErrorKind::numeric, message);
}

[[noreturn]] inline void throw_internal(const std::string& message) {
    throw Error(ErrorKind::internal, message);
}

} // namespace entropic
