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
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace auditem {

struct ColumnSpec {
  std::string name;
  bool gdpr = false;  // holds personal data eligible for erasure

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Row = std::vector<std::string>;

/// One warehouse batch: the unit of verification. Rows keep source order
/// and every cell is kept as its source text.
struct BatchSubset {
  std::string table_id;
  std::string batch_id;
  std::string timestamp;  // ISO-8601 UTC, second precision
  std::vector<ColumnSpec> schema;
  std::vector<Row> rows;

  std::size_t column_count() const noexcept { return schema.size(); }
  std::size_t row_count() const noexcept { return rows.size(); }

  /// Throws Errc::schema for an unknown column.
  std::size_t column_index(std::string_view name) const;
  bool has_column(std::string_view name) const noexcept;
  std::vector<std::string> column_names() const;
  std::vector<std::string> gdpr_columns() const;

  friend bool operator==(const BatchSubset&, const BatchSubset&) = default;
};

/// Checks every BatchSubset invariant; throws Errc::schema / Errc::empty_batch.
void validate(const BatchSubset& batch);

/// True when the text is free of the bytes reserved by the canonical
/// hashing frame (0x1E, 0x1F).
bool is_frame_safe(std::string_view text) noexcept;

struct LoadOptions {
  std::string table_id;
  std::string batch_column;
  std::set<std::string> gdpr_columns;
  /// Optional column carrying the batch timestamp (first row of each batch
  /// wins). When empty, ingest_time is used.
  std::string timestamp_column;
  /// Fallback timestamp; empty means "now".
  std::string ingest_time;
  char delimiter = ',';
};

/// RFC-4180 style record splitter. Each record carries the 1-based source
/// line it starts on.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::string_view text, char delimiter = ',');
std::string format_csv_field(std::string_view field, char delimiter = ',');

std::vector<BatchSubset> parse_batches(std::string_view text, const LoadOptions& options);
std::vector<BatchSubset> load_batches(const std::filesystem::path& path,
                                      const LoadOptions& options);

/// Writes batches back as one table, the batch column first.
void write_batches(const std::filesystem::path& path, std::span<const BatchSubset> batches,
                   std::string_view batch_column);

/// Ordering used for batch ids: all-digit ids compare numerically,
/// everything else lexicographically.
bool batch_id_less(std::string_view a, std::string_view b) noexcept;

/// Accepts YYYY-MM-DD, YYYY-MM-DD[T ]HH:MM:SS with optional trailing Z.
/// Returns YYYY-MM-DDTHH:MM:SSZ. Throws Errc::validation.
std::string normalize_timestamp(std::string_view text);
std::string utc_now_iso8601();

/// Returns a copy with every cell of the named columns set to "".
BatchSubset erase_columns(BatchSubset batch, const std::set<std::string>& columns);

/// Loaded batches keyed by (table_id, batch_id). Read-only once populated.
class BatchRegistry {
 public:
  void add(BatchSubset batch);
  void add_all(std::vector<BatchSubset> batches);

  /// Throws Errc::not_found.
  const BatchSubset& get(std::string_view table_id, std::string_view batch_id) const;
  bool contains(std::string_view table_id, std::string_view batch_id) const;
  std::vector<std::string> batch_ids(std::string_view table_id) const;
  std::size_t size() const noexcept { return batches_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, BatchSubset> batches_;
};

inline const BatchSubset& get_batch(const BatchRegistry& registry, std::string_view table_id,
                                    std::string_view batch_id) {
  return registry.get(table_id, batch_id);
}

}  // namespace auditem
