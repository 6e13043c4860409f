// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/error.hpp"

namespace kpdet {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kBadVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated stream";
    case ErrorCode::kMissingTensor: return "missing tensor";
    case ErrorCode::kMalformed: return "malformed input";
    case ErrorCode::kBadImage: return "bad image";
    case ErrorCode::kDegenerate: return "degenerate geometry";
    case ErrorCode::kDiverged: return "optimization diverged";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown";
}

}  // namespace kpdet
