// Copyright 2026 The Auditem Authors
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

namespace auditem {

/// Error classes surfaced by the library. The CLI prints the class name as
/// a stable machine-parsable token, so names must not change.
enum class Errc {
  ingestion,
  schema,
  empty_batch,
  not_found,
  degenerate_input,
  bounds,
  incomparable,
  authentication,
  corruption,
  storage,
  duplicate,
  authorization,
  validation,
  access,
  rejected,
  invalid_signature,
  environment,
  config,
  usage,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace auditem
