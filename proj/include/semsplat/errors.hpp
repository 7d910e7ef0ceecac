// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace semsplat {

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    EmptyCloud,
    DegenerateRotation,
    Divergence,
    BadMagic,
    UnsupportedVersion,
    UnsupportedDtype,
    Truncated,
    LengthMismatch,
    CrcMismatch,
    MissingFile,
    EmptyDataset,
    Validation,
    UnknownPrompt,
    Io,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code. All library failures
/// surface as this type so callers (CLI, HTTP service) can map them to exit
/// codes and status codes without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace semsplat
