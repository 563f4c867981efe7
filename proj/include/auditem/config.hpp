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

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "auditem/cas.hpp"
#include "auditem/ledger.hpp"
#include "auditem/warehouse.hpp"

namespace auditem {

/// A warehouse table backed by a CSV extract.
struct TableSource {
  std::filesystem::path csv;
  LoadOptions options;
};

/// Deployment settings read from a "key = value" file.
///
///   ledger = state/ledger            # directory; omit for in-memory
///   cas = disk:state/cas             # or "memory"
///   identity = Org1/alice            # default caller
///   commit_delay_ms = 0
///   member.Org1/alice.secret = s3cret
///   member.Org1/alice.roles = uploader,auditor,gdpr
///   grant.collection = Org1:Auditors     # owner:reader
///   grant.certificates = Org1:Auditors
///   cleanup_client = Org1/alice
///   table.LowVoltage.csv = data/low_voltage.csv
///   table.LowVoltage.batch_column = BatchId
///   table.LowVoltage.gdpr = EndPoint
///   table.LowVoltage.timestamp_column = begindate
///
/// Relative paths resolve against the directory holding the file.
struct AppConfig {
  std::filesystem::path ledger_dir;
  std::string cas = "memory";
  std::string identity;
  std::chrono::microseconds commit_delay{0};
  AccessPolicy policy;
  std::map<std::string, TableSource, std::less<>> tables;

  LedgerOptions ledger_options() const;
  std::unique_ptr<ContentStore> open_store() const;
  /// The named identity, or the configured default when `name` is empty.
  Identity resolve_identity(std::string_view name = {}) const;
  const TableSource& table(std::string_view table_id) const;
};

AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

/// Explicit flag first, then $AUDITEM_CONFIG, then ./auditem.conf.
std::filesystem::path config_path(const std::optional<std::string>& flag);

}  // namespace auditem
