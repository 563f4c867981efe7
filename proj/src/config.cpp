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

#include "auditem/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "auditem/error.hpp"

namespace auditem {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view value, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto end = value.find(sep, start);
    if (end == std::string_view::npos) end = value.size();
    std::string item = trim(value.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
  std::filesystem::path p{std::string(value)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

struct MemberDraft {
  std::string secret;
  std::set<std::string, std::less<>> roles;
};

}  // namespace

LedgerOptions AppConfig::ledger_options() const {
  LedgerOptions options;
  options.commit_delay = commit_delay;
  options.storage_dir = ledger_dir;
  return options;
}

std::unique_ptr<ContentStore> AppConfig::open_store() const {
  if (cas == "memory") return std::make_unique<MemoryStore>();
  if (cas.rfind("disk:", 0) == 0 && cas.size() > 5) return std::make_unique<DiskStore>(cas.substr(5));
  throw Error(Errc::config, "cas must be 'memory' or 'disk:<dir>', got '" + cas + "'");
}

Identity AppConfig::resolve_identity(std::string_view name) const {
  std::string_view wanted = name.empty() ? std::string_view(identity) : name;
  if (wanted.empty()) throw Error(Errc::config, "no identity selected");
  try {
    return policy.identity(wanted);
  } catch (const Error&) {
    throw Error(Errc::config, "unknown identity '" + std::string(wanted) + "'");
  }
}

const TableSource& AppConfig::table(std::string_view table_id) const {
  auto it = tables.find(table_id);
  if (it == tables.end()) throw Error(Errc::config, "table '" + std::string(table_id) + "' is not configured");
  return it->second;
}

AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  AppConfig config;
  std::map<std::string, MemberDraft> members;
  std::vector<std::pair<std::string, std::string>> collection_grants;
  std::vector<std::pair<std::string, std::string>> certificate_grants;
  std::optional<std::string> cleanup;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto where = [&] { return "config line " + std::to_string(lineno) + ": "; };
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::config, where() + "expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));

    if (key == "ledger") {
      config.ledger_dir = resolve(base_dir, value);
    } else if (key == "cas") {
      if (value.rfind("disk:", 0) == 0) {
        config.cas = "disk:" + resolve(base_dir, value.substr(5)).string();
      } else {
        config.cas = value;
      }
    } else if (key == "identity") {
      config.identity = value;
    } else if (key == "commit_delay_ms") {
      try {
        config.commit_delay = std::chrono::microseconds(static_cast<long long>(std::stod(value) * 1000));
      } catch (const std::exception&) {
        throw Error(Errc::config, where() + "commit_delay_ms must be a number");
      }
    } else if (key == "cleanup_client") {
      cleanup = value;
    } else if (key == "grant.collection" || key == "grant.certificates") {
      auto parts = split_list(value, ':');
      if (parts.size() != 2) throw Error(Errc::config, where() + "grants take owner:reader");
      (key == "grant.collection" ? collection_grants : certificate_grants).emplace_back(parts[0], parts[1]);
    } else if (key.rfind("member.", 0) == 0) {
      auto dot = key.rfind('.');
      std::string name = key.substr(7, dot - 7);
      std::string field = key.substr(dot + 1);
      if (dot <= 7 || name.find('/') == std::string::npos) {
        throw Error(Errc::config, where() + "members are written member.<org>/<user>.<field>");
      }
      if (field == "secret") {
        members[name].secret = value;
      } else if (field == "roles") {
        for (auto& r : split_list(value)) members[name].roles.insert(r);
      } else {
        throw Error(Errc::config, where() + "unknown member field '" + field + "'");
      }
    } else if (key.rfind("table.", 0) == 0) {
      auto dot = key.rfind('.');
      if (dot <= 6) throw Error(Errc::config, where() + "tables are written table.<id>.<field>");
      std::string id = key.substr(6, dot - 6);
      std::string field = key.substr(dot + 1);
      TableSource& t = config.tables[id];
      t.options.table_id = id;
      if (field == "csv") {
        t.csv = resolve(base_dir, value);
      } else if (field == "batch_column") {
        t.options.batch_column = value;
      } else if (field == "gdpr") {
        for (auto& c : split_list(value)) t.options.gdpr_columns.insert(c);
      } else if (field == "timestamp_column") {
        t.options.timestamp_column = value;
      } else if (field == "ingest_time") {
        t.options.ingest_time = value;
      } else if (field == "delimiter") {
        if (value.size() != 1) throw Error(Errc::config, where() + "delimiter must be one character");
        t.options.delimiter = value[0];
      } else {
        throw Error(Errc::config, where() + "unknown table field '" + field + "'");
      }
    } else {
      throw Error(Errc::config, where() + "unknown key '" + key + "'");
    }
  }

  for (auto& [name, draft] : members) {
    if (draft.secret.empty()) throw Error(Errc::config, "member " + name + " has no secret");
    auto slash = name.find('/');
    config.policy.add_member(Identity{name.substr(0, slash), name.substr(slash + 1), draft.secret},
                             std::move(draft.roles));
  }
  for (auto& [owner, reader] : collection_grants) config.policy.grant_collection(owner, reader);
  for (auto& [owner, reader] : certificate_grants) config.policy.grant_certificates(owner, reader);
  if (cleanup) config.policy.set_cleanup_client(*cleanup);
  for (auto& [id, t] : config.tables) {
    if (t.csv.empty() || t.options.batch_column.empty()) {
      throw Error(Errc::config, "table " + id + " needs csv and batch_column");
    }
  }
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::config, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::filesystem::path config_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("AUDITEM_CONFIG"); env != nullptr && *env != '\0') return env;
  return "auditem.conf";
}

}  // namespace auditem
