// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kpdet {

// Values match kpdet_status in kpdet.h.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kIo = 3,
  kBadMagic = 4,
  kBadVersion = 5,
  kTruncated = 6,
  kMissingTensor = 7,
  kMalformed = 8,
  kBadImage = 9,
  kDegenerate = 10,
  kDiverged = 11,
  kInternal = 12,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kpdet
