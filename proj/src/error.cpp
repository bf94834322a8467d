// Copyright 2026 The spatialrisk Authors
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

#include "spatialrisk/error.hpp"

namespace spatialrisk {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidRegion: return "invalid-region";
    case ErrorKind::kInvalidParameter: return "invalid-parameter";
    case ErrorKind::kOutOfBounds: return "out-of-bounds";
    case ErrorKind::kNotPositiveSemidefinite: return "not-positive-semidefinite";
    case ErrorKind::kTruncationBudget: return "truncation-budget";
    case ErrorKind::kLevelUnusable: return "level-unusable";
    case ErrorKind::kInvalidCoefficient: return "invalid-coefficient";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kEmptyRegion: return "empty-region";
    case ErrorKind::kSampleSize: return "sample-size";
    case ErrorKind::kDisjointness: return "disjointness";
    case ErrorKind::kExcludedLevel: return "excluded-level";
    case ErrorKind::kEdgeEffect: return "edge-effect";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace spatialrisk
