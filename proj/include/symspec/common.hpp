#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace symspec {

/// Index type shared by every structure; matches the `int` used by emitted C.
using index_t = std::int32_t;

inline constexpr index_t kNone = -1;

struct ParseError : std::runtime_error {
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularError : std::runtime_error {
    explicit SingularError(index_t column)
        : std::runtime_error("zero diagonal at column " + std::to_string(column)), column(column) {}
    index_t column;
};

/// Raised when a Cholesky pivot is not strictly positive.
struct NotSpdError : std::runtime_error {
    explicit NotSpdError(index_t column)
        : std::runtime_error("not-SPD at column " + std::to_string(column)), column(column) {}
    index_t column;
};

}  // namespace symspec
