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

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "auditem/warehouse.hpp"

namespace auditem::testing {

inline std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(AUDITEM_DATA_DIR) / name;
}

inline BatchSubset make_batch(std::vector<std::string> columns, std::vector<Row> rows,
                              const std::set<std::string>& gdpr = {}, std::string batch_id = "1") {
  BatchSubset b;
  b.table_id = "T";
  b.batch_id = std::move(batch_id);
  b.timestamp = "2021-01-01T00:00:00Z";
  for (auto& c : columns) b.schema.push_back({c, gdpr.count(c) > 0});
  b.rows = std::move(rows);
  return b;
}

/// Random batch with up to max_rows x max_cols cells of short lowercase text.
inline BatchSubset random_batch(std::mt19937_64& rng, std::size_t max_rows, std::size_t max_cols,
                                std::size_t gdpr_cols = 0) {
  std::uniform_int_distribution<std::size_t> nrows(1, max_rows);
  std::uniform_int_distribution<std::size_t> ncols(std::max<std::size_t>(1, gdpr_cols + 1), max_cols);
  std::uniform_int_distribution<int> len(0, 6);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::size_t rows = nrows(rng);
  std::size_t cols = ncols(rng);
  std::vector<std::string> names;
  std::set<std::string> gdpr;
  for (std::size_t c = 0; c < cols; ++c) {
    names.push_back("c" + std::to_string(c));
    if (c < gdpr_cols) gdpr.insert(names.back());
  }
  std::vector<Row> data(rows, Row(cols));
  for (auto& row : data) {
    for (auto& cell : row) {
      int n = len(rng);
      for (int i = 0; i < n; ++i) cell.push_back(static_cast<char>(ch(rng)));
    }
  }
  return make_batch(names, data, gdpr);
}

/// A value guaranteed to differ from `cell`.
inline std::string mutated(const std::string& cell) { return cell + "#"; }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("auditem-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace auditem::testing
