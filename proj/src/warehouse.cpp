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

#include "auditem/warehouse.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "auditem/error.hpp"

namespace auditem {

namespace {

bool is_digits(std::string_view s) noexcept {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string line_ref(std::size_t line) { return "line " + std::to_string(line); }

}  // namespace

std::size_t BatchSubset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  throw Error(Errc::schema, "unknown column '" + std::string(name) + "' in batch " + table_id +
                                "/" + batch_id);
}

bool BatchSubset::has_column(std::string_view name) const noexcept {
  return std::any_of(schema.begin(), schema.end(),
                     [&](const ColumnSpec& c) { return c.name == name; });
}

std::vector<std::string> BatchSubset::column_names() const {
  std::vector<std::string> out;
  out.reserve(schema.size());
  for (const auto& c : schema) out.push_back(c.name);
  return out;
}

std::vector<std::string> BatchSubset::gdpr_columns() const {
  std::vector<std::string> out;
  for (const auto& c : schema) {
    if (c.gdpr) out.push_back(c.name);
  }
  return out;
}

bool is_frame_safe(std::string_view text) noexcept {
  return text.find('\x1e') == std::string_view::npos && text.find('\x1f') == std::string_view::npos;
}

void validate(const BatchSubset& batch) {
  if (batch.table_id.empty() || batch.batch_id.empty()) {
    throw Error(Errc::schema, "batch identity requires non-empty table and batch ids");
  }
  // '|' frames the evidence key.
  if (batch.table_id.find('|') != std::string::npos ||
      batch.batch_id.find('|') != std::string::npos) {
    throw Error(Errc::schema, "table and batch ids must not contain '|'");
  }
  if (batch.schema.empty()) {
    throw Error(Errc::schema, "batch " + batch.batch_id + " has no columns");
  }
  std::unordered_set<std::string> seen;
  for (const auto& column : batch.schema) {
    if (column.name.empty()) throw Error(Errc::schema, "empty column name");
    if (!is_frame_safe(column.name) || column.name.find('\n') != std::string::npos) {
      throw Error(Errc::schema, "column name contains a reserved separator byte");
    }
    if (!seen.insert(column.name).second) {
      throw Error(Errc::schema, "duplicate column name '" + column.name + "'");
    }
  }
  if (batch.rows.empty()) {
    throw Error(Errc::empty_batch, "batch " + batch.table_id + "/" + batch.batch_id + " has no rows");
  }
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    const Row& row = batch.rows[r];
    if (row.size() != batch.schema.size()) {
      throw Error(Errc::schema, "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                                    " cells, schema has " + std::to_string(batch.schema.size()));
    }
    for (const auto& cell : row) {
      if (!is_frame_safe(cell)) {
        throw Error(Errc::schema, "row " + std::to_string(r) + " contains a reserved separator byte");
      }
    }
  }
}

std::vector<CsvRecord> parse_csv(std::string_view text, char delimiter) {
  std::vector<CsvRecord> records;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM

  while (i < n) {
    CsvRecord record;
    record.line = line;
    std::string field;
    bool record_done = false;
    bool blank = true;
    while (!record_done) {
      if (i < n && text[i] == '"') {
        blank = false;
        ++i;
        for (;;) {
          if (i >= n) {
            throw Error(Errc::ingestion, "unterminated quoted field starting at " + line_ref(record.line));
          }
          char c = text[i++];
          if (c == '"') {
            if (i < n && text[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (i < n && text[i] != delimiter && text[i] != '\n' && text[i] != '\r') {
          throw Error(Errc::ingestion, "unexpected character after closing quote at " + line_ref(line));
        }
      } else {
        while (i < n && text[i] != delimiter && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') {
            throw Error(Errc::ingestion, "stray quote inside unquoted field at " + line_ref(line));
          }
          field.push_back(text[i++]);
          blank = false;
        }
      }
      record.fields.push_back(std::move(field));
      field.clear();
      if (i < n && text[i] == delimiter) {
        blank = false;
        ++i;
        continue;
      }
      if (i < n && text[i] == '\r') ++i;
      if (i < n && text[i] == '\n') ++i;
      ++line;
      record_done = true;
    }
    if (!blank) records.push_back(std::move(record));
  }
  return records;
}

std::string format_csv_field(std::string_view field, char delimiter) {
  bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool batch_id_less(std::string_view a, std::string_view b) noexcept {
  if (is_digits(a) && is_digits(b)) {
    auto strip = [](std::string_view s) {
      auto pos = s.find_first_not_of('0');
      return pos == std::string_view::npos ? std::string_view("0") : s.substr(pos);
    };
    auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

std::vector<BatchSubset> parse_batches(std::string_view text, const LoadOptions& options) {
  if (options.table_id.empty()) throw Error(Errc::usage, "table id is required");
  if (options.batch_column.empty()) throw Error(Errc::usage, "batch column is required");

  std::vector<CsvRecord> records = parse_csv(text, options.delimiter);
  if (records.empty()) throw Error(Errc::empty_batch, "input has no header and no rows");
  const CsvRecord& header = records.front();

  auto find_column = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = std::find(header.fields.begin(), header.fields.end(), name);
    return it == header.fields.end() ? -1 : it - header.fields.begin();
  };
  std::set<std::string_view> seen;
  for (const auto& name : header.fields) {
    if (name.empty()) throw Error(Errc::ingestion, "empty column name in header at " + line_ref(header.line));
    if (!seen.insert(name).second) throw Error(Errc::schema, "duplicate column '" + name + "' in header");
  }
  std::ptrdiff_t batch_col = find_column(options.batch_column);
  if (batch_col < 0) {
    throw Error(Errc::schema, "batch column '" + options.batch_column + "' not in header");
  }
  for (const auto& g : options.gdpr_columns) {
    if (g == options.batch_column || find_column(g) < 0) {
      throw Error(Errc::schema, "GDPR column '" + g + "' is not a data column");
    }
  }
  std::ptrdiff_t ts_col = -1;
  if (!options.timestamp_column.empty()) {
    ts_col = find_column(options.timestamp_column);
    if (ts_col < 0) {
      throw Error(Errc::schema, "timestamp column '" + options.timestamp_column + "' not in header");
    }
  }
  if (records.size() == 1) throw Error(Errc::empty_batch, "input has a header but no data rows");

  std::vector<ColumnSpec> schema;
  for (std::size_t c = 0; c < header.fields.size(); ++c) {
    if (static_cast<std::ptrdiff_t>(c) == batch_col) continue;
    schema.push_back({header.fields[c], options.gdpr_columns.count(header.fields[c]) > 0});
  }

  const std::string fallback_time =
      options.ingest_time.empty() ? utc_now_iso8601() : normalize_timestamp(options.ingest_time);

  std::map<std::string, BatchSubset> grouped;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& rec = records[r];
    if (rec.fields.size() != header.fields.size()) {
      throw Error(Errc::ingestion, "ragged row at " + line_ref(rec.line) + ": expected " +
                                       std::to_string(header.fields.size()) + " fields, got " +
                                       std::to_string(rec.fields.size()));
    }
    const std::string& id = rec.fields[batch_col];
    if (id.empty()) throw Error(Errc::ingestion, "empty batch id at " + line_ref(rec.line));
    auto [it, inserted] = grouped.try_emplace(id);
    BatchSubset& batch = it->second;
    if (inserted) {
      batch.table_id = options.table_id;
      batch.batch_id = id;
      batch.schema = schema;
      try {
        batch.timestamp = ts_col >= 0 ? normalize_timestamp(rec.fields[ts_col]) : fallback_time;
      } catch (const Error& e) {
        throw Error(Errc::ingestion, std::string(e.what()) + " at " + line_ref(rec.line));
      }
    }
    Row row;
    row.reserve(schema.size());
    for (std::size_t c = 0; c < rec.fields.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == batch_col) continue;
      if (!is_frame_safe(rec.fields[c])) {
        throw Error(Errc::ingestion, "reserved separator byte in cell at " + line_ref(rec.line));
      }
      row.push_back(rec.fields[c]);
    }
    batch.rows.push_back(std::move(row));
  }

  std::vector<BatchSubset> out;
  out.reserve(grouped.size());
  for (auto& [id, batch] : grouped) out.push_back(std::move(batch));
  std::sort(out.begin(), out.end(), [](const BatchSubset& a, const BatchSubset& b) {
    return batch_id_less(a.batch_id, b.batch_id);
  });
  for (const auto& batch : out) validate(batch);
  return out;
}

std::vector<BatchSubset> load_batches(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ingestion, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_batches(buffer.str(), options);
}

void write_batches(const std::filesystem::path& path, std::span<const BatchSubset> batches,
                   std::string_view batch_column) {
  if (batches.empty()) throw Error(Errc::empty_batch, "nothing to write");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::storage, "cannot write " + path.string());
  out << format_csv_field(batch_column);
  for (const auto& column : batches.front().schema) out << ',' << format_csv_field(column.name);
  out << '\n';
  for (const auto& batch : batches) {
    if (batch.schema.size() != batches.front().schema.size()) {
      throw Error(Errc::schema, "batches disagree on schema");
    }
    for (const auto& row : batch.rows) {
      out << format_csv_field(batch.batch_id);
      for (const auto& cell : row) out << ',' << format_csv_field(cell);
      out << '\n';
    }
  }
  if (!out) throw Error(Errc::storage, "write failed for " + path.string());
}

std::string normalize_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  std::string t(text);
  if (!t.empty() && t.back() == 'Z') t.pop_back();
  char sep = 0;
  int consumed = 0;
  bool ok = false;
  if (t.size() == 10) {
    ok = std::sscanf(t.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) == 3 && consumed == 10;
  } else if (t.size() == 19) {
    ok = std::sscanf(t.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &s,
                     &consumed) == 7 &&
         consumed == 19 && (sep == 'T' || sep == ' ');
  }
  ok = ok && mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h <= 23 && mi <= 59 && s <= 60 &&
       h >= 0 && mi >= 0 && s >= 0;
  if (ok) {
    using namespace std::chrono;
    ok = year_month_day{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}}.ok();
  }
  if (!ok) throw Error(Errc::validation, "unrecognized timestamp '" + std::string(text) + "'");
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, mo, d, h, mi, s);
  return buf;
}

std::string utc_now_iso8601() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

BatchSubset erase_columns(BatchSubset batch, const std::set<std::string>& columns) {
  std::vector<std::size_t> indices;
  for (const auto& name : columns) indices.push_back(batch.column_index(name));
  for (auto& row : batch.rows) {
    for (std::size_t idx : indices) row[idx].clear();
  }
  return batch;
}

void BatchRegistry::add(BatchSubset batch) {
  validate(batch);
  auto key = std::make_pair(batch.table_id, batch.batch_id);
  batches_.insert_or_assign(std::move(key), std::move(batch));
}

void BatchRegistry::add_all(std::vector<BatchSubset> batches) {
  for (auto& b : batches) add(std::move(b));
}

const BatchSubset& BatchRegistry::get(std::string_view table_id, std::string_view batch_id) const {
  auto it = batches_.find({std::string(table_id), std::string(batch_id)});
  if (it == batches_.end()) {
    throw Error(Errc::not_found,
                "batch " + std::string(table_id) + "/" + std::string(batch_id) + " not found");
  }
  return it->second;
}

bool BatchRegistry::contains(std::string_view table_id, std::string_view batch_id) const {
  return batches_.count({std::string(table_id), std::string(batch_id)}) > 0;
}

std::vector<std::string> BatchRegistry::batch_ids(std::string_view table_id) const {
  std::vector<std::string> ids;
  for (const auto& [key, batch] : batches_) {
    if (key.first == table_id) ids.push_back(key.second);
  }
  std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
    return batch_id_less(a, b);
  });
  return ids;
}

}  // namespace auditem
