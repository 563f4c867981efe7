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

// auditem: command-line front end for uploading, auditing and GDPR cleanup
// of warehouse batches, plus the benchmark harnesses.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "auditem/bench.hpp"
#include "auditem/config.hpp"
#include "auditem/divt.hpp"
#include "auditem/error.hpp"

namespace {

using namespace auditem;
using nlohmann::json;

struct Globals {
  std::optional<std::string> config_file;
  std::string identity;
  bool json = false;
  int verbose = 0;
};

// Lazily built deployment: bench commands never touch the config.
class Session {
 public:
  explicit Session(const Globals& g) : globals_(g) {}

  AppConfig& config() {
    if (!config_) config_ = load_config(config_path(globals_.config_file));
    return *config_;
  }
  Identity identity() { return config().resolve_identity(globals_.identity); }
  Ledger& ledger() {
    if (!ledger_) ledger_ = std::make_unique<Ledger>(config().policy, config().ledger_options());
    return *ledger_;
  }
  ContentStore& store() {
    if (!store_) store_ = config().open_store();
    return *store_;
  }
  Divt& divt() {
    if (!divt_) {
      divt_ = std::make_unique<Divt>(ledger(), store());
      if (globals_.verbose > 0) divt_->set_timings(&timings_);
    }
    return *divt_;
  }
  BatchRegistry warehouse(const std::string& table, const std::string& csv_override) {
    const TableSource& source = config().table(table);
    BatchRegistry registry;
    registry.add_all(load_batches(csv_override.empty() ? source.csv : std::filesystem::path(csv_override),
                                  source.options));
    return registry;
  }
  void print_timings() const {
    if (globals_.verbose == 0) return;
    for (std::size_t s = 0; s < StageTimings::kStageCount; ++s) {
      auto stage = static_cast<StageTimings::Stage>(s);
      double secs = timings_.seconds(stage);
      if (secs > 0) std::cerr << "timing " << StageTimings::name(stage) << ' ' << secs << "s\n";
    }
  }
  bool json_output() const { return globals_.json; }

 private:
  const Globals& globals_;
  std::optional<AppConfig> config_;
  std::unique_ptr<Ledger> ledger_;
  std::unique_ptr<ContentStore> store_;
  std::unique_ptr<Divt> divt_;
  StageTimings timings_;
};

void print_error(const Error& e) { std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n'; }

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> select_batches(const BatchRegistry& wh, const std::string& table, bool all,
                                        const std::vector<std::string>& batches) {
  if (all) return wh.batch_ids(table);
  if (batches.empty()) throw Error(Errc::usage, "pass --all or at least one --batch");
  return batches;
}

Bytes read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage, "cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::storage, "cannot write " + path);
}

void print_report(Session& s, const TamperReport& r) {
  if (s.json_output()) {
    std::cout << json(r).dump() << '\n';
    return;
  }
  std::cout << r.summary() << '\n';
  for (const auto& c : r.changed_cells) {
    std::cout << "  row " << c.row << " column " << c.column << ": \"" << c.reference_value << "\" -> \""
              << c.current_value << "\"\n";
  }
}

// --- subcommands -----------------------------------------------------------

int cmd_upload(Session& s, const std::string& table, bool all, const std::vector<std::string>& batches, int level,
               const std::string& csv) {
  auto wh = s.warehouse(table, csv);
  Identity who = s.identity();
  int failures = 0;
  for (const auto& id : select_batches(wh, table, all, batches)) {
    try {
      UploadResult up = s.divt().upload(wh.get(table, id), traceability_from_int(level), who);
      if (s.json_output()) {
        std::cout << json{{"table_id", table}, {"batch_id", id},       {"evidence_key", up.evidence_key},
                          {"h_v", up.h_v.hex()}, {"h_l", up.h_l.hex()}, {"height", up.height}}
                         .dump()
                  << '\n';
      } else {
        std::cout << "uploaded " << table << '/' << id << " level " << level << " key " << up.evidence_key
                  << " h_v " << up.h_v.hex() << " h_l " << up.h_l.hex() << '\n';
      }
    } catch (const Error& e) {
      print_error(e);
      ++failures;
    }
  }
  s.print_timings();
  return failures == 0 ? 0 : 1;
}

// Exit status: 0 all authentic, 1 a check could not run, 3 tampering or
// missing evidence found (wins over 1).
constexpr int kFindings = 3;

int exit_code(const TamperReport& r) {
  if (r.verdict == Verdict::authentic) return 0;
  return r.verdict == Verdict::failed ? 1 : kFindings;
}

int cmd_verify(Session& s, const std::string& table, const std::string& batch, bool deep, const std::string& csv) {
  auto wh = s.warehouse(table, csv);
  const BatchSubset& b = wh.get(table, batch);
  Identity who = s.identity();
  Verify1Result quick = s.divt().verify1(b, who);
  if (s.json_output()) {
    json j{{"table_id", table},       {"batch_id", batch},          {"evidence_key", quick.evidence_key},
           {"evidence_found", quick.evidence_found}, {"match", quick.match}, {"h_v", quick.h_v.hex()}};
    if (quick.h_v_chain) j["h_v_chain"] = quick.h_v_chain->hex();
    std::cout << j.dump() << '\n';
  } else if (!quick.evidence_found) {
    std::cout << table << '/' << batch << ": MissingEvidence\n";
  } else {
    std::cout << "verify1 " << table << '/' << batch << ": " << (quick.match ? "match" : "mismatch") << " live "
              << quick.h_v.hex() << " anchored " << quick.h_v_chain->hex() << '\n';
  }
  int rc = quick.match ? 0 : kFindings;
  if (deep && quick.evidence_found) {
    TamperReport report = s.divt().verify2(b, who);
    print_report(s, report);
    rc = std::max(rc, exit_code(report));
  }
  s.print_timings();
  return rc;
}

// With --all, batches anchored on the ledger but gone from the warehouse are
// audited too.
std::vector<std::string> audit_targets(Session& s, const BatchRegistry& wh, const std::string& table, bool all,
                                       const std::vector<std::string>& batches, const Identity& who) {
  std::vector<std::string> ids = select_batches(wh, table, all, batches);
  if (!all) return ids;
  std::set<std::string> seen(ids.begin(), ids.end());
  for (const auto& key : query_evidence_by_owner(s.ledger(), who, who.org)) {
    Evidence e = query_evidence(s.ledger(), who, key);
    if (e.table_name == table && seen.insert(e.batch_id).second) ids.push_back(e.batch_id);
  }
  std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) { return batch_id_less(a, b); });
  return ids;
}

int cmd_audit(Session& s, const std::string& table, bool all, const std::vector<std::string>& batches,
              const std::string& csv) {
  auto wh = s.warehouse(table, csv);
  Identity who = s.identity();
  auto reports = s.divt().audit(wh, table, audit_targets(s, wh, table, all, batches, who), who);
  int rc = 0;
  for (const auto& r : reports) rc = std::max(rc, exit_code(r));
  for (const auto& r : reports) print_report(s, r);
  s.print_timings();
  return rc;
}

int cmd_cert(Session& s, const std::string& key) {
  auto certs = s.divt().external_audit(key, s.identity());
  if (s.json_output()) {
    std::cout << json(certs).dump() << '\n';
    return 0;
  }
  if (certs.empty()) std::cout << "no certificates for " << key << '\n';
  for (const auto& c : certs) {
    std::cout << c.date << ' ' << to_string(c.result) << " by " << c.auditor_org << '/' << c.auditor_user << ": "
              << c.detail << '\n';
  }
  return 0;
}

int cmd_gdpr_delete(Session& s, const std::string& table, const std::string& batch, const std::string& columns,
                    const std::string& reason, bool write_back, const std::string& csv) {
  auto wh = s.warehouse(table, csv);
  auto cols = split_commas(columns);
  if (cols.empty()) throw Error(Errc::usage, "--columns needs at least one column");
  const BatchSubset& original = wh.get(table, batch);
  for (const auto& c : cols) original.column_index(c);
  BatchSubset erased = erase_columns(original, std::set<std::string>(cols.begin(), cols.end()));
  Receipt receipt = s.divt().gdpr_delete(erased, reason, s.identity());
  if (s.json_output()) {
    std::cout << json{{"table_id", table}, {"batch_id", batch}, {"tx_id", receipt.tx_id},
                      {"height", receipt.height.value_or(0)}, {"evidence", json::parse(receipt.payload)}}
                     .dump()
              << '\n';
  } else {
    std::cout << "updated " << table << '/' << batch << " erased " << columns << " at height "
              << receipt.height.value_or(0) << '\n';
  }
  if (write_back) {
    std::vector<BatchSubset> all;
    for (const auto& id : wh.batch_ids(table)) all.push_back(id == batch ? erased : wh.get(table, id));
    const TableSource& source = s.config().table(table);
    write_batches(csv.empty() ? source.csv : std::filesystem::path(csv), all, source.options.batch_column);
  }
  return 0;
}

int cmd_bench_overhead(Session& s, const std::string& config_file, const std::string& out) {
  std::ifstream in(config_file);
  if (!in) throw Error(Errc::config, "cannot read " + config_file);
  std::stringstream buf;
  buf << in.rdbuf();
  bench::OverheadReport report = bench::run_overhead(bench::parse_overhead_config(buf.str()));
  if (s.json_output()) {
    json rows = json::array();
    for (const auto& r : report.rows) {
      rows.push_back({{"config", r.config}, {"stage", r.stage},     {"mean_s", r.mean_s}, {"sd_s", r.sd_s},
                      {"median_s", r.median_s}, {"samples", r.samples}, {"skipped", r.skipped}});
    }
    write_text(out, rows.dump() + "\n");
  } else {
    write_text(out, report.to_csv());
  }
  return 0;
}

int cmd_bench_load(Session& s, const std::string& rates, std::size_t workers, std::size_t tx_count,
                   double delay_ms, const std::string& op, double cap, const std::string& out) {
  bench::LoadConfig config;
  for (const auto& r : split_commas(rates)) {
    try {
      config.send_rates.push_back(std::stod(r));
    } catch (const std::exception&) {
      throw Error(Errc::usage, "bad rate '" + r + "'");
    }
  }
  config.workers = workers;
  config.tx_count = tx_count;
  config.commit_delay = std::chrono::microseconds(static_cast<long long>(std::llround(delay_ms * 1000)));
  config.duration_cap_s = cap;
  if (op == "write") {
    config.op = bench::LoadOp::write;
  } else if (op == "read") {
    config.op = bench::LoadOp::read;
  } else {
    throw Error(Errc::usage, "--op must be write or read");
  }
  bench::LoadReport report = bench::run_load(config);
  if (s.json_output()) {
    json rows = json::array();
    for (const auto& r : report.rows) {
      rows.push_back({{"rate", r.rate},           {"submitted", r.submitted},   {"committed", r.committed},
                      {"send_rate", r.send_rate}, {"throughput", r.throughput}, {"lat_min", r.lat_min},
                      {"lat_avg", r.lat_avg},     {"lat_max", r.lat_max},       {"success_ratio", r.success_ratio}});
    }
    write_text(out, rows.dump() + "\n");
  } else {
    write_text(out, report.to_csv());
  }
  return 0;
}

int cmd_verify_chain(Session& s) {
  ChainCheck check = s.ledger().verify_chain();
  if (s.json_output()) {
    json j{{"ok", check.ok}, {"height", s.ledger().height()}};
    if (check.first_bad_height) j["first_bad_height"] = *check.first_bad_height;
    std::cout << j.dump() << '\n';
  } else if (check.ok) {
    std::cout << "chain ok, height " << s.ledger().height() << '\n';
  } else {
    std::cout << "chain broken at height " << *check.first_bad_height << '\n';
  }
  return check.ok ? 0 : 1;
}

int cmd_query_evidence(Session& s, const std::string& key) {
  Evidence e = query_evidence(s.ledger(), s.identity(), key);
  if (s.json_output()) {
    std::cout << json(e).dump() << '\n';
  } else {
    std::cout << e.organisation << '/' << e.table_name << '/' << e.batch_id << " level "
              << to_int(e.traceability) << " h_v " << e.verification_hash.hex() << " h_l "
              << e.location_hash.hex() << '\n';
  }
  return 0;
}

int cmd_cas_put(Session& s, const std::string& file) {
  LocationHash address = s.store().put(read_binary(file));
  std::cout << (s.json_output() ? json{{"address", address.hex()}}.dump() : address.hex()) << '\n';
  return 0;
}

int cmd_cas_get(Session& s, const std::string& hex, const std::string& out) {
  Bytes bytes = s.store().get(Digest::from_hex(hex));
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::storage, "cannot write " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"auditem: tamper-evident auditing of data warehouse batches"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "Config file (default: $AUDITEM_CONFIG, then ./auditem.conf)");
  app.add_option("--identity", g.identity, "Acting identity as org/user (default: from config)");
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_flag("-v,--verbose", g.verbose, "Print stage timings to stderr");

  Session session(g);
  std::function<int()> action;

  std::string table, csv, batch;
  std::vector<std::string> batches;
  bool all = false;
  int level = 1;
  auto table_opts = [&](CLI::App* cmd) {
    cmd->add_option("--table", table, "Warehouse table id")->required();
    cmd->add_option("--csv", csv, "Read the table from this file instead of the configured one");
  };

  auto* upload = app.add_subcommand("upload", "Anchor batches on the ledger");
  table_opts(upload);
  upload->add_option("--batch", batches, "Batch id (repeatable)");
  upload->add_flag("--all", all, "Every batch in the table");
  upload->add_option("--level", level, "Traceability level 1-3")->check(CLI::Range(1, 3));
  upload->callback([&] { action = [&] { return cmd_upload(session, table, all, batches, level, csv); }; });

  bool deep = false;
  auto* verify = app.add_subcommand("verify", "Hash check of one batch");
  table_opts(verify);
  verify->add_option("--batch", batch, "Batch id")->required();
  verify->add_flag("--deep", deep, "Also run the deep comparison");
  verify->callback([&] { action = [&] { return cmd_verify(session, table, batch, deep, csv); }; });

  auto* audit = app.add_subcommand("audit", "Tiered audit of batches");
  table_opts(audit);
  audit->add_option("--batch", batches, "Batch id (repeatable)");
  audit->add_flag("--all", all, "Every batch in the table or on the ledger");
  audit->callback([&] { action = [&] { return cmd_audit(session, table, all, batches, csv); }; });

  std::string key;
  auto* cert = app.add_subcommand("cert", "List certificates for an evidence key");
  cert->add_option("--key", key, "Evidence key")->required();
  cert->callback([&] { action = [&] { return cmd_cert(session, key); }; });

  std::string columns, reason;
  bool write_back = false;
  auto* gdpr = app.add_subcommand("gdpr-delete", "Erase GDPR columns of a batch and re-anchor it");
  table_opts(gdpr);
  gdpr->add_option("--batch", batch, "Batch id")->required();
  gdpr->add_option("--columns", columns, "Comma-separated columns to erase")->required();
  gdpr->add_option("--reason", reason, "Reason recorded in the update log")->required();
  gdpr->add_flag("--write", write_back, "Also write the erased cells back to the CSV");
  gdpr->callback([&] {
    action = [&] { return cmd_gdpr_delete(session, table, batch, columns, reason, write_back, csv); };
  });

  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
  bench_cmd->require_subcommand(1);
  std::string bench_config, out;
  auto* overhead = bench_cmd->add_subcommand("overhead", "Protocol overhead vs batch count and size");
  overhead->add_option("--config", bench_config, "Overhead config file")->required();
  overhead->add_option("-o,--output", out, "Report file (default: stdout)");
  overhead->callback([&] { action = [&] { return cmd_bench_overhead(session, bench_config, out); }; });

  std::string rates = "1,2,4,8,16,32,64,128,256", op = "write";
  std::size_t workers = 10, tx_count = 100;
  double delay_ms = 0, cap = 0;
  auto* load = bench_cmd->add_subcommand("load", "Ledger throughput and latency at fixed send rates");
  load->add_option("--rates", rates, "Comma-separated target send rates (tx/s)");
  load->add_option("--workers", workers, "Load worker threads")->check(CLI::PositiveNumber);
  load->add_option("--tx-count", tx_count, "Transactions per rate")->check(CLI::PositiveNumber);
  load->add_option("--commit-delay-ms", delay_ms, "Artificial per-commit delay in the orderer")
      ->check(CLI::NonNegativeNumber);
  load->add_option("--op", op, "write or read");
  load->add_option("--duration-cap", cap, "Cap each rate at about this many seconds")->check(CLI::NonNegativeNumber);
  load->add_option("-o,--output", out, "Report file (default: stdout)");
  load->callback([&] {
    action = [&] { return cmd_bench_load(session, rates, workers, tx_count, delay_ms, op, cap, out); };
  });

  auto* ledger_cmd = app.add_subcommand("ledger", "Ledger inspection");
  ledger_cmd->require_subcommand(1);
  ledger_cmd->add_subcommand("verify-chain", "Recompute every block hash")->callback([&] {
    action = [&] { return cmd_verify_chain(session); };
  });
  auto* qe = ledger_cmd->add_subcommand("query-evidence", "Show anchored evidence");
  qe->add_option("--key", key, "Evidence key")->required();
  qe->callback([&] { action = [&] { return cmd_query_evidence(session, key); }; });
  auto* certs = ledger_cmd->add_subcommand("certs", "List certificates");
  certs->add_option("key", key, "Evidence key")->required();
  certs->callback([&] { action = [&] { return cmd_cert(session, key); }; });

  auto* cas_cmd = app.add_subcommand("cas", "Content store access");
  cas_cmd->require_subcommand(1);
  std::string file, address;
  auto* put = cas_cmd->add_subcommand("put", "Store a file, print its address");
  put->add_option("file", file, "File to store")->required()->check(CLI::ExistingFile);
  put->callback([&] { action = [&] { return cmd_cas_put(session, file); }; });
  auto* get = cas_cmd->add_subcommand("get", "Fetch an object by address");
  get->add_option("address", address, "Hex address")->required();
  get->add_option("-o,--output", out, "Destination file")->required();
  get->callback([&] { action = [&] { return cmd_cas_get(session, address, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << '\n';
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    print_error(e);
    return e.code() == Errc::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
}
