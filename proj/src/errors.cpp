// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/errors.hpp"

namespace semsplat {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::ShapeMismatch: return "shape-mismatch";
        case ErrorCode::EmptyCloud: return "empty-cloud";
        case ErrorCode::DegenerateRotation: return "degenerate-rotation";
        case ErrorCode::Divergence: return "divergence";
        case ErrorCode::BadMagic: return "bad-magic";
        case ErrorCode::UnsupportedVersion: return "unsupported-version";
        case ErrorCode::UnsupportedDtype: return "unsupported-dtype";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::LengthMismatch: return "length-mismatch";
        case ErrorCode::CrcMismatch: return "crc-mismatch";
        case ErrorCode::MissingFile: return "missing-file";
        case ErrorCode::EmptyDataset: return "empty-dataset";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::UnknownPrompt: return "unknown-prompt";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

}  // namespace semsplat
