// Copyright 2026 The gradleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GRADLEAK_STATUS_MACROS_H_
#define GRADLEAK_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define GRADLEAK_CONCAT_INNER_(a, b) a##b
#define GRADLEAK_CONCAT_(a, b) GRADLEAK_CONCAT_INNER_(a, b)

#define RETURN_IF_ERROR(expr)                 \
  do {                                        \
    const absl::Status _status = (expr);      \
    if (!_status.ok()) return _status;        \
  } while (0)

#define ASSIGN_OR_RETURN(lhs, rexpr) \
  ASSIGN_OR_RETURN_IMPL_(GRADLEAK_CONCAT_(_statusor_, __LINE__), lhs, rexpr)

#define ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                           \
  if (!statusor.ok()) return statusor.status();      \
  lhs = std::move(statusor).value()

namespace gradleak {

// Prefixes a failed status with the pipeline stage that produced it.
inline absl::Status WithStage(absl::string_view stage,
                              const absl::Status& status) {
  if (status.ok()) return status;
  return absl::Status(status.code(),
                      std::string(stage) + ": " + std::string(status.message()));
}

}  // namespace gradleak

#endif  // GRADLEAK_STATUS_MACROS_H_
