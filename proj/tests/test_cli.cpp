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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "auditem/config.hpp"
#include "auditem/divt.hpp"
#include "support.hpp"

namespace auditem {
namespace {

using nlohmann::json;
using testing::TempDir;
namespace fs = std::filesystem;

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    work_ = tmp_.path() / "deploy";
    fs::create_directories(work_);
    for (const char* f : {"low_voltage.csv", "low_voltage_scenario_a.csv", "low_voltage_scenario_b.csv"}) {
      fs::copy_file(testing::data_file(f), work_ / f);
    }
    std::ofstream(work_ / "auditem.conf") << slurp(testing::data_file("example.conf"));
  }

  CliRun run(const std::vector<std::string>& args) {
    std::string cmd = "cd " + quote(work_.string()) + " && " + quote(AUDITEM_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    fs::path out = tmp_.path() / "stdout", err = tmp_.path() / "stderr";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    int raw = std::system(cmd.c_str());
    CliRun r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  void upload_all(int level = 3) {
    CliRun r = run({"upload", "--table", "LowVoltage", "--all", "--level", std::to_string(level)});
    ASSERT_EQ(r.status, 0) << r.err;
  }

  // The same deployment driven through the library, with its own state.
  AppConfig library_config() {
    AppConfig c = parse_config(slurp(testing::data_file("example.conf")), lib_dir_.path());
    c.ledger_dir = lib_dir_.path() / "ledger";
    c.cas = "memory";
    return c;
  }

  TempDir tmp_;
  TempDir lib_dir_;
  fs::path work_;
};

TEST_F(CliTest, UploadTwiceReportsDuplicate) {
  upload_all();
  CliRun r = run({"upload", "--table", "LowVoltage", "--batch", "1"});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("error: duplicate"), std::string::npos) << r.err;
}

TEST_F(CliTest, UploadPrintsOracleHashForBatch100) {
  CliRun r = run({"--json", "upload", "--table", "LowVoltage", "--batch", "100"});
  ASSERT_EQ(r.status, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j.at("h_v"), "e5d2fc11c74c7831bb7649cbc3d870c91ee387c43c6b3d9939fe254bafdec507");
  EXPECT_EQ(j.at("evidence_key"), "b40f012584c28c278f9be3d45b93f7538d3a3a63899e8f4e560901947847f173");
}

TEST_F(CliTest, MissingBatchSelectionIsUsageError) {
  CliRun r = run({"upload", "--table", "LowVoltage"});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("error: usage"), std::string::npos) << r.err;
  EXPECT_EQ(run({"no-such-command"}).status, 2);
}

TEST_F(CliTest, ScenarioAAuditNamesBegindate) {
  upload_all();
  CliRun r = run({"--identity", "Electron/ivan", "audit", "--table", "LowVoltage", "--all", "--csv",
               "low_voltage_scenario_a.csv"});
  EXPECT_EQ(r.status, 3) << r.err;
  EXPECT_NE(r.out.find("LowVoltage/100: Tampered"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("column begindate"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("LowVoltage/1: Authentic"), std::string::npos) << r.out;
}

TEST_F(CliTest, AuditJsonMatchesLibrary) {
  upload_all();
  CliRun r = run({"--json", "--identity", "Electron/ivan", "audit", "--table", "LowVoltage", "--all", "--csv",
               "low_voltage_scenario_b.csv"});
  ASSERT_EQ(r.status, 3) << r.err;

  AppConfig c = library_config();
  Ledger ledger(c.policy, c.ledger_options());
  auto store = c.open_store();
  Divt divt(ledger, *store);
  BatchRegistry registry;
  registry.add_all(load_batches(work_ / "low_voltage.csv", c.table("LowVoltage").options));
  for (const auto& id : registry.batch_ids("LowVoltage")) {
    divt.upload(registry.get("LowVoltage", id), Traceability::full, c.resolve_identity("Electron/alice"));
  }
  BatchRegistry tampered;
  tampered.add_all(load_batches(work_ / "low_voltage_scenario_b.csv", c.table("LowVoltage").options));
  auto reports = divt.audit(tampered, "LowVoltage", tampered.batch_ids("LowVoltage"),
                            c.resolve_identity("Electron/ivan"));

  std::istringstream lines(r.out);
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    ASSERT_LT(i, reports.size());
    EXPECT_EQ(json::parse(line), json(reports[i])) << line;
    ++i;
  }
  EXPECT_EQ(i, reports.size());
}

TEST_F(CliTest, VerifyExitCodes) {
  upload_all();
  EXPECT_EQ(run({"verify", "--table", "LowVoltage", "--batch", "2"}).status, 0);
  EXPECT_EQ(run({"--identity", "Electron/ivan", "verify", "--table", "LowVoltage", "--batch", "2", "--deep"}).status,
            0);
  // Deep comparison needs the auditor role; a check that cannot run exits 1.
  EXPECT_EQ(run({"verify", "--table", "LowVoltage", "--batch", "2", "--deep"}).status, 1);
  CliRun bad = run({"verify", "--table", "LowVoltage", "--batch", "100", "--csv", "low_voltage_scenario_a.csv"});
  EXPECT_EQ(bad.status, 3);
  EXPECT_NE(bad.out.find("mismatch"), std::string::npos) << bad.out;
}

TEST_F(CliTest, ExternalAuditorReadsCertificates) {
  upload_all();
  ASSERT_EQ(run({"--identity", "Electron/ivan", "audit", "--table", "LowVoltage", "--batch", "100"}).status, 0);
  const std::string key = evidence_key("Electron", "LowVoltage", "100");
  CliRun r = run({"--json", "--identity", "Auditors/eve", "cert", "--key", key});
  ASSERT_EQ(r.status, 0) << r.err;
  json certs = json::parse(r.out);
  ASSERT_EQ(certs.size(), 1u);
  EXPECT_EQ(certs[0].dump().find("Authentic") != std::string::npos, true) << certs.dump();

  // An external auditor from an organisation without a grant.
  std::ofstream(work_ / "auditem.conf", std::ios::app)
      << "member.Other/mallory.secret = m\nmember.Other/mallory.roles = external_auditor\n";
  CliRun denied = run({"--identity", "Other/mallory", "cert", "--key", key});
  EXPECT_EQ(denied.status, 1);
  EXPECT_NE(denied.err.find("error: access"), std::string::npos) << denied.err;
}

TEST_F(CliTest, GdprDeleteAcceptedForCleanupClientOnly) {
  upload_all();
  CliRun denied = run({"gdpr-delete", "--table", "LowVoltage", "--batch", "1", "--columns", "EndPoint", "--reason", "r"});
  EXPECT_EQ(denied.status, 1);
  EXPECT_NE(denied.err.find("error: authorization"), std::string::npos);

  CliRun ok = run({"--identity", "Electron/cleanup", "gdpr-delete", "--table", "LowVoltage", "--batch", "1",
                "--columns", "EndPoint", "--reason", "erasure request", "--write"});
  ASSERT_EQ(ok.status, 0) << ok.err;

  // The rewritten warehouse now verifies against the updated evidence.
  CliRun after = run({"--identity", "Electron/ivan", "audit", "--table", "LowVoltage", "--all"});
  EXPECT_EQ(after.status, 0) << after.out << after.err;
}

TEST_F(CliTest, GdprDeleteRejectsNonGdprColumn) {
  upload_all();
  CliRun r = run({"--identity", "Electron/cleanup", "gdpr-delete", "--table", "LowVoltage", "--batch", "1",
               "--columns", "cabletype", "--reason", "r"});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("error: "), std::string::npos);
}

TEST_F(CliTest, LedgerChainAndEvidence) {
  upload_all(2);
  CliRun chain = run({"--json", "ledger", "verify-chain"});
  ASSERT_EQ(chain.status, 0) << chain.err;
  EXPECT_TRUE(json::parse(chain.out).at("ok"));

  CliRun ev = run({"--json", "ledger", "query-evidence", "--key", evidence_key("Electron", "LowVoltage", "5")});
  ASSERT_EQ(ev.status, 0) << ev.err;
  Evidence e = json::parse(ev.out).get<Evidence>();
  EXPECT_EQ(e.batch_id, "5");
  EXPECT_EQ(e.traceability, Traceability::rows);
}

TEST_F(CliTest, CasRoundTrip) {
  std::ofstream(work_ / "blob.bin", std::ios::binary) << std::string("\x00\x01payload\xff", 10);
  CliRun put = run({"cas", "put", "blob.bin"});
  ASSERT_EQ(put.status, 0) << put.err;
  std::string address = put.out.substr(0, put.out.find('\n'));
  EXPECT_EQ(address.size(), 64u);
  ASSERT_EQ(run({"cas", "get", address, "-o", "copy.bin"}).status, 0);
  EXPECT_EQ(slurp(work_ / "copy.bin"), slurp(work_ / "blob.bin"));

  CliRun missing = run({"cas", "get", std::string(64, '0'), "-o", "x.bin"});
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.err.find("error: not-found"), std::string::npos) << missing.err;
}

TEST_F(CliTest, BenchLoadWritesReport) {
  CliRun r = run({"--json", "bench", "load", "--rates", "8,16", "--tx-count", "8", "-o", "load.json"});
  ASSERT_EQ(r.status, 0) << r.err;
  json rows = json::parse(slurp(work_ / "load.json"));
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) EXPECT_EQ(row.at("success_ratio"), 1.0);
}

}  // namespace
}  // namespace auditem
