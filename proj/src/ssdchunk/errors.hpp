// SPDX-License-Identifier: Apache-2.0
//
// Error type thrown by the core library. The C API maps each kind onto a
// stable status code.

#pragma once

#include <stdexcept>
#include <string>

namespace ssdchunk {

enum class ErrorKind {
    Dimension,   // extents of operands disagree
    Validation,  // value outside its admissible domain
    Index,       // index outside [0, size]
    Capacity,    // request exceeds a configured guardrail
    Integrity,   // checksum mismatch
    Format,      // malformed or truncated file/document
    Io,          // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

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

inline void require(bool condition, ErrorKind kind, const char* message) {
    if (!condition) fail(kind, message);
}

}  // namespace ssdchunk
