#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace popfrac {

enum class ErrorKind {
    invalid_argument,  // precondition violated by the caller
    data,              // malformed or inconsistent input data
    not_found,         // missing file or artifact
    io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorKind::invalid_argument, message);
}

}  // namespace popfrac
