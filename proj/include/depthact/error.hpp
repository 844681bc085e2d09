// Copyright 2026 The depthact Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depthact {

enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kDimensionMismatch,
  kTruncatedPayload,
  kEmptySequence,
  kInvalidArgument,
  kGridMismatch,
  kEmptyInput,
  kSingleClass,
  kNotANumber,
  kLayoutMismatch,
  kUsage,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kEmptySequence: return "empty sequence";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kGridMismatch: return "grid mismatch";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kSingleClass: return "single class";
    case ErrorCode::kNotANumber: return "not a number";
    case ErrorCode::kLayoutMismatch: return "layout mismatch";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

// All library failures are reported through this type; `code()` tells
// callers which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace depthact
