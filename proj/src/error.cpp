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

#include "auditem/error.hpp"

namespace auditem {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ingestion: return "ingestion";
    case Errc::schema: return "schema";
    case Errc::empty_batch: return "empty-batch";
    case Errc::not_found: return "not-found";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::bounds: return "bounds";
    case Errc::incomparable: return "incomparable";
    case Errc::authentication: return "authentication";
    case Errc::corruption: return "corruption";
    case Errc::storage: return "storage";
    case Errc::duplicate: return "duplicate";
    case Errc::authorization: return "authorization";
    case Errc::validation: return "validation";
    case Errc::access: return "access";
    case Errc::rejected: return "rejected";
    case Errc::invalid_signature: return "invalid-signature";
    case Errc::environment: return "environment";
    case Errc::config: return "config";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

}  // namespace auditem
