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

#include "auditem/attributes.hpp"

#include <algorithm>
#include <map>

#include "auditem/error.hpp"

namespace auditem {

using nlohmann::json;

namespace {

constexpr char kUnit = '\x1f';
constexpr char kRecord = '\x1e';

// Hashes the projection of `batch` onto `columns` (schema indices, in
// order) and rows [row_begin, row_end).
Digest hash_projection(const BatchSubset& batch, const std::vector<std::size_t>& columns,
                       std::size_t row_begin, std::size_t row_end) {
  Sha256 h;
  h.update(std::to_string(row_end - row_begin));
  for (std::size_t c : columns) {
    h.update(kUnit);
    h.update(batch.schema[c].name);
  }
  h.update(kRecord);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const Row& row = batch.rows[r];
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i > 0) h.update(kUnit);
      h.update(row[columns[i]]);
    }
    h.update(kRecord);
  }
  return h.finish();
}

std::vector<std::size_t> columns_except(const BatchSubset& batch, const std::set<std::string>& exclude) {
  for (const auto& name : exclude) batch.column_index(name);  // rejects unknown names
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < batch.schema.size(); ++c) {
    if (exclude.count(batch.schema[c].name) == 0) kept.push_back(c);
  }
  return kept;
}

std::set<std::string> gdpr_set(const BatchSubset& batch) {
  std::set<std::string> out;
  for (const auto& c : batch.schema) {
    if (c.gdpr) out.insert(c.name);
  }
  return out;
}

std::string describe(const VerificationAttribute& v) {
  std::string fields = "h_v, cols, rows, gdpr, gdprHash";
  switch (v.traceability) {
    case Traceability::columns: fields += ", colHash"; break;
    case Traceability::rows: fields += ", colHash, rowHash"; break;
    case Traceability::full: fields += ", data"; break;
  }
  std::string mutable_cols;
  for (const auto& g : v.gdpr) {
    if (!mutable_cols.empty()) mutable_cols += ", ";
    mutable_cols += g;
  }
  if (mutable_cols.empty()) mutable_cols = "none";
  return "traceability level " + std::to_string(to_int(v.traceability)) + "; attributes: " + fields +
         "; mutable GDPR columns: " + mutable_cols +
         "; all other columns are immutable and must keep their hashes";
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(Errc::validation, "malformed verification record: " + what);
}

}  // namespace

Traceability traceability_from_int(int level) {
  if (level < 1 || level > 3) {
    throw Error(Errc::validation, "traceability level must be 1, 2 or 3, got " + std::to_string(level));
  }
  return static_cast<Traceability>(level);
}

IdentificationAttribute id_att_gen(const BatchSubset& batch, std::string_view organization) {
  if (organization.empty() || organization.find('|') != std::string_view::npos) {
    throw Error(Errc::validation, "organization must be non-empty and free of '|'");
  }
  if (batch.table_id.empty() || batch.batch_id.empty() || batch.timestamp.empty()) {
    throw Error(Errc::validation, "batch identity is incomplete");
  }
  return {std::string(organization), batch.table_id, batch.batch_id, batch.timestamp};
}

Digest subset_hash(const BatchSubset& batch, const std::set<std::string>& exclude) {
  std::vector<std::size_t> kept = columns_except(batch, exclude);
  if (kept.empty()) {
    throw Error(Errc::degenerate_input, "exclusion set removes every column of batch " + batch.batch_id);
  }
  return hash_projection(batch, kept, 0, batch.rows.size());
}

Digest column_hash(const BatchSubset& batch, std::string_view column) {
  return hash_projection(batch, {batch.column_index(column)}, 0, batch.rows.size());
}

Digest row_hash(const BatchSubset& batch, std::size_t row_index) {
  if (row_index >= batch.rows.size()) {
    throw Error(Errc::bounds, "row index " + std::to_string(row_index) + " out of range for " +
                                  std::to_string(batch.rows.size()) + " rows");
  }
  std::vector<std::size_t> all(batch.schema.size());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
  return hash_projection(batch, all, row_index, row_index + 1);
}

VerificationAttribute vrfc_att_gen(const BatchSubset& batch, Traceability level) {
  validate(batch);
  VerificationAttribute v;
  v.traceability = level;
  v.cols = batch.column_names();
  v.rows = batch.rows.size();
  v.gdpr = batch.gdpr_columns();
  v.h_v = subset_hash(batch);
  // An all-GDPR batch hashes the zero-column projection (row count only).
  v.gdpr_hash = hash_projection(batch, columns_except(batch, gdpr_set(batch)), 0, batch.rows.size());

  if (level == Traceability::columns || level == Traceability::rows) {
    std::vector<Digest> cols;
    cols.reserve(batch.schema.size());
    for (std::size_t c = 0; c < batch.schema.size(); ++c) {
      cols.push_back(hash_projection(batch, {c}, 0, batch.rows.size()));
    }
    v.col_hash = std::move(cols);
  }
  if (level == Traceability::rows) {
    std::vector<Digest> rows;
    rows.reserve(batch.rows.size());
    for (std::size_t r = 0; r < batch.rows.size(); ++r) rows.push_back(row_hash(batch, r));
    v.row_hash = std::move(rows);
  }
  if (level == Traceability::full) v.data = batch.rows;
  return v;
}

VerificationRecord rec_gen(IdentificationAttribute id, VerificationAttribute v) {
  std::string description = describe(v);
  return {std::move(id), std::move(v), std::move(description)};
}

std::string canonical_bytes(const VerificationRecord& record) {
  try {
    return json(record).dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("record is not valid UTF-8: ") + e.what());
  }
}

VerificationRecord parse_record(std::string_view bytes) {
  try {
    return json::parse(bytes).get<VerificationRecord>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    malformed(e.what());
  }
}

AttributeDiff diff_attributes(const VerificationAttribute& current,
                              const VerificationAttribute& reference) {
  if (current.traceability != reference.traceability) {
    throw Error(Errc::incomparable, "traceability levels differ (" +
                                        std::to_string(to_int(current.traceability)) + " vs " +
                                        std::to_string(to_int(reference.traceability)) + ")");
  }
  if (current.cols != reference.cols) {
    throw Error(Errc::incomparable, "column lists differ");
  }
  AttributeDiff d;
  d.h_v_mismatch = current.h_v != reference.h_v;
  d.gdpr_hash_mismatch = current.gdpr_hash != reference.gdpr_hash;
  d.row_count_delta =
      static_cast<std::int64_t>(current.rows) - static_cast<std::int64_t>(reference.rows);
  const std::size_t shared_rows = std::min(current.rows, reference.rows);
  const std::size_t max_rows = std::max(current.rows, reference.rows);

  if (current.col_hash && reference.col_hash) {
    for (std::size_t c = 0; c < current.cols.size(); ++c) {
      if ((*current.col_hash)[c] != (*reference.col_hash)[c]) d.changed_columns.push_back(current.cols[c]);
    }
  }
  if (current.row_hash && reference.row_hash) {
    for (std::size_t r = 0; r < shared_rows; ++r) {
      if ((*current.row_hash)[r] != (*reference.row_hash)[r]) d.changed_rows.push_back(r);
    }
    for (std::size_t r = shared_rows; r < max_rows; ++r) d.changed_rows.push_back(r);
  }
  if (current.data && reference.data) {
    const auto& cur = *current.data;
    const auto& ref = *reference.data;
    std::vector<bool> column_changed(current.cols.size(), d.row_count_delta != 0);
    for (std::size_t r = 0; r < shared_rows; ++r) {
      bool row_changed = false;
      for (std::size_t c = 0; c < current.cols.size(); ++c) {
        if (cur[r][c] != ref[r][c]) {
          d.changed_cells.push_back({r, current.cols[c], ref[r][c], cur[r][c]});
          column_changed[c] = true;
          row_changed = true;
        }
      }
      if (row_changed) d.changed_rows.push_back(r);
    }
    for (std::size_t r = shared_rows; r < max_rows; ++r) d.changed_rows.push_back(r);
    for (std::size_t c = 0; c < current.cols.size(); ++c) {
      if (column_changed[c]) d.changed_columns.push_back(current.cols[c]);
    }
  }
  return d;
}

void to_json(json& j, const IdentificationAttribute& id) {
  j = json{{"Organisation", id.organization},
           {"TableId", id.table_id},
           {"BatchId", id.batch_id},
           {"Timestamp", id.timestamp}};
}

void from_json(const json& j, IdentificationAttribute& id) {
  j.at("Organisation").get_to(id.organization);
  j.at("TableId").get_to(id.table_id);
  j.at("BatchId").get_to(id.batch_id);
  j.at("Timestamp").get_to(id.timestamp);
}

void to_json(json& j, const VerificationAttribute& v) {
  j = json{{"h_v", v.h_v.hex()},
           {"traceability", std::to_string(to_int(v.traceability))},
           {"cols", v.cols},
           {"rows", v.rows},
           {"gdpr", v.gdpr},
           {"gdprHash", v.gdpr_hash.hex()}};
  if (v.col_hash) {
    json cols = json::object();
    for (std::size_t c = 0; c < v.cols.size(); ++c) cols[v.cols[c]] = (*v.col_hash)[c].hex();
    j["colHash"] = std::move(cols);
  }
  if (v.row_hash) {
    json rows = json::array();
    for (const auto& d : *v.row_hash) rows.push_back(d.hex());
    j["rowHash"] = std::move(rows);
  }
  if (v.data) j["data"] = *v.data;
}

void from_json(const json& j, VerificationAttribute& v) {
  v.h_v = Digest::from_hex(j.at("h_v").get<std::string>());
  const auto& level = j.at("traceability");
  v.traceability = traceability_from_int(level.is_string() ? std::stoi(level.get<std::string>())
                                                           : level.get<int>());
  j.at("cols").get_to(v.cols);
  j.at("rows").get_to(v.rows);
  j.at("gdpr").get_to(v.gdpr);
  v.gdpr_hash = Digest::from_hex(j.at("gdprHash").get<std::string>());

  const bool wants_cols = v.traceability != Traceability::full;
  const bool wants_rows = v.traceability == Traceability::rows;
  const bool wants_data = v.traceability == Traceability::full;
  if (j.contains("colHash") != wants_cols || j.contains("rowHash") != wants_rows ||
      j.contains("data") != wants_data) {
    malformed("fields do not match traceability level " + std::to_string(to_int(v.traceability)));
  }
  v.col_hash.reset();
  v.row_hash.reset();
  v.data.reset();
  if (wants_cols) {
    const auto& obj = j.at("colHash");
    if (!obj.is_object() || obj.size() != v.cols.size()) malformed("colHash does not cover cols");
    std::vector<Digest> hashes;
    for (const auto& name : v.cols) hashes.push_back(Digest::from_hex(obj.at(name).get<std::string>()));
    v.col_hash = std::move(hashes);
  }
  if (wants_rows) {
    std::vector<Digest> hashes;
    for (const auto& h : j.at("rowHash")) hashes.push_back(Digest::from_hex(h.get<std::string>()));
    if (hashes.size() != v.rows) malformed("rowHash length differs from rows");
    v.row_hash = std::move(hashes);
  }
  if (wants_data) {
    auto data = j.at("data").get<std::vector<Row>>();
    if (data.size() != v.rows) malformed("data length differs from rows");
    for (const auto& row : data) {
      if (row.size() != v.cols.size()) malformed("data row width differs from cols");
    }
    v.data = std::move(data);
  }
}

void to_json(json& j, const VerificationRecord& r) {
  j = json{{"identification", r.id}, {"verification", r.v}, {"description", r.description}};
}

void from_json(const json& j, VerificationRecord& r) {
  j.at("identification").get_to(r.id);
  j.at("verification").get_to(r.v);
  j.at("description").get_to(r.description);
}

void to_json(json& j, const AttributeDiff& d) {
  json cells = json::array();
  for (const auto& c : d.changed_cells) {
    cells.push_back({{"row", c.row}, {"column", c.column}, {"old", c.reference_value}, {"new", c.current_value}});
  }
  j = json{{"h_v_mismatch", d.h_v_mismatch},
           {"gdpr_hash_mismatch", d.gdpr_hash_mismatch},
           {"changed_columns", d.changed_columns},
           {"changed_rows", d.changed_rows},
           {"changed_cells", std::move(cells)},
           {"row_count_delta", d.row_count_delta}};
}

}  // namespace auditem
