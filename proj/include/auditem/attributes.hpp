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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "auditem/digest.hpp"
#include "auditem/warehouse.hpp"
#include "json.hpp"

namespace auditem {

/// How much of a batch the off-chain record can localize: column hashes,
/// column + row hashes, or the full cell grid.
enum class Traceability : int { columns = 1, rows = 2, full = 3 };

/// Throws Errc::validation outside 1..3.
Traceability traceability_from_int(int level);
inline int to_int(Traceability t) noexcept { return static_cast<int>(t); }

/// Public keyword set locating a batch's evidence. Never holds row data.
struct IdentificationAttribute {
  std::string organization;
  std::string table_id;
  std::string batch_id;
  std::string timestamp;

  friend bool operator==(const IdentificationAttribute&, const IdentificationAttribute&) = default;
};

struct VerificationAttribute {
  Digest h_v;
  Traceability traceability = Traceability::columns;
  std::vector<std::string> cols;
  std::size_t rows = 0;
  std::vector<std::string> gdpr;
  Digest gdpr_hash;
  std::optional<std::vector<Digest>> col_hash;  // aligned with cols; levels 1 and 2
  std::optional<std::vector<Digest>> row_hash;  // one per row; level 2
  std::optional<std::vector<Row>> data;         // level 3

  friend bool operator==(const VerificationAttribute&, const VerificationAttribute&) = default;
};

struct VerificationRecord {
  IdentificationAttribute id;
  VerificationAttribute v;
  std::string description;

  friend bool operator==(const VerificationRecord&, const VerificationRecord&) = default;
};

IdentificationAttribute id_att_gen(const BatchSubset& batch, std::string_view organization);

/// SHA-256 over the canonical framing of the batch with `exclude` removed.
/// The frame is: decimal row count, then each column name preceded by 0x1F,
/// then 0x1E; each row's cells joined by 0x1F and terminated by 0x1E.
Digest subset_hash(const BatchSubset& batch, const std::set<std::string>& exclude = {});
/// Canonical hash of the single-column projection.
Digest column_hash(const BatchSubset& batch, std::string_view column);
/// Canonical hash of the single-row projection.
Digest row_hash(const BatchSubset& batch, std::size_t row_index);

VerificationAttribute vrfc_att_gen(const BatchSubset& batch, Traceability level);

/// Bundles both attributes; the description names the level's fields and
/// every mutable (GDPR-flagged) column.
VerificationRecord rec_gen(IdentificationAttribute id, VerificationAttribute v);

/// Key-sorted, whitespace-free JSON. Equal records give equal bytes.
std::string canonical_bytes(const VerificationRecord& record);
/// Throws Errc::validation on malformed input or fields that do not match
/// the declared level.
VerificationRecord parse_record(std::string_view bytes);

struct CellChange {
  std::size_t row = 0;
  std::string column;
  std::string reference_value;
  std::string current_value;

  friend bool operator==(const CellChange&, const CellChange&) = default;
};

/// Result of comparing a live attribute against the anchored one. Columns
/// are in schema order, rows ascending.
struct AttributeDiff {
  bool h_v_mismatch = false;
  bool gdpr_hash_mismatch = false;
  std::vector<std::string> changed_columns;
  std::vector<std::size_t> changed_rows;
  std::vector<CellChange> changed_cells;
  std::int64_t row_count_delta = 0;  // current - reference

  bool empty() const noexcept {
    return !h_v_mismatch && !gdpr_hash_mismatch && changed_columns.empty() &&
           changed_rows.empty() && changed_cells.empty() && row_count_delta == 0;
  }
};

/// Throws Errc::incomparable when levels or column lists differ.
AttributeDiff diff_attributes(const VerificationAttribute& current,
                              const VerificationAttribute& reference);

void to_json(nlohmann::json& j, const IdentificationAttribute& id);
void from_json(const nlohmann::json& j, IdentificationAttribute& id);
void to_json(nlohmann::json& j, const VerificationAttribute& v);
void from_json(const nlohmann::json& j, VerificationAttribute& v);
void to_json(nlohmann::json& j, const VerificationRecord& r);
void from_json(const nlohmann::json& j, VerificationRecord& r);
void to_json(nlohmann::json& j, const AttributeDiff& d);

}  // namespace auditem
