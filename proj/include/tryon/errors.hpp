// Copyright 2026 The tryon Authors. All rights reserved.
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

namespace tryon {

// Every contract violation raised by the library derives from Error so the
// CLI can map it to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define TRYON_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(tag, what) {}        \
  };

TRYON_DEFINE_ERROR(LayoutError, "layout error")
TRYON_DEFINE_ERROR(IndexError, "index error")
TRYON_DEFINE_ERROR(ModeViolationError, "mode violation")
TRYON_DEFINE_ERROR(IoError, "I/O error")
TRYON_DEFINE_ERROR(ConsistencyError, "consistency error")
TRYON_DEFINE_ERROR(PaletteError, "palette error")
TRYON_DEFINE_ERROR(ConfigError, "config error")
TRYON_DEFINE_ERROR(GeometryError, "geometry error")
TRYON_DEFINE_ERROR(SingularityError, "singularity error")
TRYON_DEFINE_ERROR(ShapeError, "shape error")
TRYON_DEFINE_ERROR(ContractError, "contract error")
TRYON_DEFINE_ERROR(DependencyError, "dependency error")
TRYON_DEFINE_ERROR(InsufficientDataError, "insufficient data")
TRYON_DEFINE_ERROR(ComparabilityError, "comparability error")
TRYON_DEFINE_ERROR(DataError, "data error")
TRYON_DEFINE_ERROR(NumericError, "numeric error")

#undef TRYON_DEFINE_ERROR

}  // namespace tryon
