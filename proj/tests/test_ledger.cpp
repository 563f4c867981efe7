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

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "auditem/attributes.hpp"
#include "auditem/ledger.hpp"
#include "support.hpp"

using namespace auditem;
using auditem::testing::make_batch;
using auditem::testing::TempDir;

namespace {

struct World {
  Identity alice{"Electron", "alice", "alice-secret"};   // uploader
  Identity ivan{"Electron", "ivan", "ivan-secret"};      // auditor
  Identity clean{"Electron", "cleanup", "clean-secret"};  // gdpr
  Identity eve{"Auditors", "eve", "eve-secret"};          // external auditor
  Identity mallory{"Rival", "mallory", "mallory-secret"};  // uploader elsewhere

  AccessPolicy policy() const {
    AccessPolicy p;
    p.add_member(alice, {"uploader"});
    p.add_member(ivan, {"auditor"});
    p.add_member(clean, {"gdpr"});
    p.add_member(eve, {"external_auditor"});
    p.add_member(mallory, {"uploader", "auditor"});
    p.grant_certificates("Electron", "Auditors");
    return p;
  }
};

Digest digest_of(std::string_view s) { return sha256(s); }

Evidence evidence_for(const Identity& who, std::string batch) {
  return Evidence{who.org, "LowVoltage", std::move(batch), digest_of("hv" + batch), digest_of("hl" + batch),
                  Traceability::columns};
}

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::usage;
}

std::string all_block_bytes(const Ledger& ledger) {
  std::string out;
  for (const auto& b : ledger.blocks()) out += serialize_block(b);
  return out;
}

}  // namespace

TEST(EvidenceKey, OracleAndFraming) {
  EXPECT_EQ(evidence_key("Electron", "LowVoltage", "100"),
            "b40f012584c28c278f9be3d45b93f7538d3a3a63899e8f4e560901947847f173");
  EXPECT_EQ(code_of([] { evidence_key("a|b", "c", "d"); }), Errc::validation);
  EXPECT_EQ(code_of([] { evidence_key("a", "", "d"); }), Errc::validation);
}

TEST(Ledger, GenesisOnlyChainVerifies) {
  World w;
  Ledger ledger(w.policy());
  EXPECT_EQ(ledger.height(), 0u);
  EXPECT_TRUE(ledger.verify_chain().ok);
}

TEST(Ledger, CreateThenQueryEvidence) {
  World w;
  Ledger ledger(w.policy());
  Evidence e = evidence_for(w.alice, "100");
  auto receipt = create_evidence(ledger, w.alice, e);
  ASSERT_TRUE(receipt.ok()) << receipt.message;
  EXPECT_EQ(receipt.height, 1u);
  EXPECT_EQ(query_evidence(ledger, w.ivan, e.key()), e);
  EXPECT_EQ(code_of([&] { query_evidence(ledger, w.ivan, evidence_key("Electron", "LowVoltage", "999")); }),
            Errc::not_found);
}

TEST(Ledger, DuplicateCreateFailsWithoutStateChange) {
  World w;
  Ledger ledger(w.policy());
  Evidence e = evidence_for(w.alice, "1");
  create_evidence(ledger, w.alice, e).expect_ok();
  Digest root = ledger.state_root();
  Evidence again = e;
  again.verification_hash = digest_of("other");
  auto r = create_evidence(ledger, w.alice, again);
  EXPECT_EQ(r.status, ReceiptStatus::failed);
  EXPECT_EQ(r.error, Errc::duplicate);
  EXPECT_NE(r.message.find("already exists"), std::string::npos);
  EXPECT_EQ(ledger.state_root(), root);
  EXPECT_EQ(query_evidence(ledger, w.alice, e.key()), e);
  // The failed attempt is still on the chain as an audit trail.
  EXPECT_EQ(ledger.block(ledger.height()).txs[0].status, TxStatus::failed);
}

TEST(Ledger, ForeignOrgAndMissingRoleRejected) {
  World w;
  Ledger ledger(w.policy());
  EXPECT_EQ(create_evidence(ledger, w.mallory, evidence_for(w.alice, "1")).error, Errc::authorization);
  EXPECT_EQ(create_evidence(ledger, w.ivan, evidence_for(w.ivan, "1")).error, Errc::authorization);
}

TEST(Ledger, InvalidSignatureRejectedBeforeOrdering) {
  World w;
  Ledger ledger(w.policy());
  Identity forged = w.alice;
  forged.secret = "guess";
  auto r = create_evidence(ledger, forged, evidence_for(w.alice, "1"));
  EXPECT_EQ(r.status, ReceiptStatus::rejected);
  EXPECT_EQ(r.error, Errc::invalid_signature);
  EXPECT_EQ(ledger.height(), 0u);

  Transaction tx = make_transaction(w.alice, Contract::evidence, "createEvidence", {"x"});
  tx.args[0] = "y";  // payload altered after signing
  EXPECT_EQ(ledger.submit(tx).error, Errc::invalid_signature);
  EXPECT_EQ(code_of([&] { query_evidence(ledger, forged, "k"); }), Errc::invalid_signature);
}

TEST(Ledger, ReplayedTransactionRejected) {
  World w;
  Ledger ledger(w.policy());
  Evidence e = evidence_for(w.alice, "1");
  Transaction tx = make_transaction(w.alice, Contract::evidence, "createEvidence",
                                    {e.key(), e.organisation, e.table_name, e.batch_id, e.verification_hash.hex(),
                                     e.location_hash.hex(), "1"});
  EXPECT_TRUE(ledger.submit(tx).ok());
  auto again = ledger.submit(tx);
  EXPECT_EQ(again.status, ReceiptStatus::rejected);
  EXPECT_EQ(ledger.height(), 1u);
}

TEST(Ledger, QueryByOwnerMatchesBruteForce) {
  World w;
  Ledger ledger(w.policy());
  for (int i = 0; i < 5; ++i) create_evidence(ledger, w.alice, evidence_for(w.alice, std::to_string(i))).expect_ok();
  for (int i = 0; i < 3; ++i) {
    create_evidence(ledger, w.mallory, evidence_for(w.mallory, std::to_string(i))).expect_ok();
  }
  for (const Identity* owner : {&w.alice, &w.mallory}) {
    std::vector<std::string> expected;
    for (const auto& [key, value] : ledger.public_state()) {
      if (key.empty() || key[0] == '\0') continue;
      if (nlohmann::json::parse(value).at("Organisation") == owner->org) expected.push_back(key);
    }
    auto got = query_evidence_by_owner(ledger, w.ivan, owner->org);
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expected);
  }
}

TEST(Ledger, QueriesAppendNothing) {
  World w;
  Ledger ledger(w.policy());
  Evidence e = evidence_for(w.alice, "1");
  KeyMaterial k = keygen();
  create_evidence(ledger, w.alice, e, &k).expect_ok();
  auto h = ledger.height();
  auto root = ledger.state_root();
  for (int i = 0; i < 50; ++i) {
    query_evidence(ledger, w.alice, e.key());
    query_private_key(ledger, w.alice, kPrivateCollection, e.key());
    query_certificates(ledger, w.alice, e.key());
    query_evidence_by_owner(ledger, w.alice, "Electron");
  }
  EXPECT_EQ(ledger.height(), h);
  EXPECT_EQ(ledger.state_root(), root);
}

TEST(PrivateKeys, StoreQueryAndAcl) {
  World w;
  Ledger ledger(w.policy());
  KeyMaterial k = keygen();
  create_private_key(ledger, w.alice, "rec-1", k).expect_ok();
  EXPECT_EQ(query_private_key(ledger, w.alice, kPrivateCollection, "rec-1"), k);
  EXPECT_EQ(query_private_key(ledger, w.ivan, kPrivateCollection, "rec-1"), k);  // same org
  try {
    query_private_key(ledger, w.eve, kPrivateCollection, "rec-1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::access);
    auto j = nlohmann::json::parse(e.what());
    EXPECT_NE(j.at("Error").get<std::string>().find("rec-1"), std::string::npos);
  }
  EXPECT_EQ(create_private_key(ledger, w.alice, "rec-1", keygen()).error, Errc::duplicate);
}

TEST(PrivateKeys, EmptyFieldsRejected) {
  World w;
  Ledger ledger(w.policy());
  for (auto transient : {std::map<std::string, std::string>{{"keys", R"({"key":"k","secretKey":"","nonce":"00"})"}},
                         std::map<std::string, std::string>{{"keys", R"({"key":"k","secretKey":"00","nonce":""})"}},
                         std::map<std::string, std::string>{}}) {
    auto r = ledger.submit(make_transaction(w.alice, Contract::private_keys, "createPrivateKey", {}, transient));
    EXPECT_EQ(r.error, Errc::validation) << r.message;
  }
}

TEST(PrivateKeys, GrantedOrgMayRead) {
  World w;
  AccessPolicy p = w.policy();
  p.grant_collection("Electron", "Auditors");
  Ledger ledger(p);
  KeyMaterial k = keygen();
  create_private_key(ledger, w.alice, "rec", k).expect_ok();
  EXPECT_EQ(query_private_key(ledger, w.eve, kPrivateCollection, "rec"), k);
}

TEST(PrivateKeys, TransientSecrecy) {
  World w;
  TempDir dir;
  std::vector<KeyMaterial> keys;
  {
    LedgerOptions o;
    o.storage_dir = dir.path();
    Ledger ledger(w.policy(), o);
    for (int i = 0; i < 10; ++i) {
      keys.push_back(keygen());
      create_evidence(ledger, w.alice, evidence_for(w.alice, std::to_string(i)), &keys.back()).expect_ok();
    }
    keys.push_back(keygen());
    create_private_key(ledger, w.alice, "standalone", keys.back()).expect_ok();
    std::string chain = all_block_bytes(ledger);
    std::string state;
    for (const auto& [k, v] : ledger.public_state()) state += k + v;
    for (const auto& k : keys) {
      for (const std::string& needle : {k.secret_key_hex(), k.nonce_hex()}) {
        EXPECT_EQ(chain.find(needle), std::string::npos);
        EXPECT_EQ(state.find(needle), std::string::npos);
      }
    }
  }
  std::ifstream log(dir.path() / "blocks.log", std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(log)), std::istreambuf_iterator<char>());
  std::ifstream st(dir.path() / "state.json", std::ios::binary);
  std::string raw_state((std::istreambuf_iterator<char>(st)), std::istreambuf_iterator<char>());
  for (const auto& k : keys) {
    EXPECT_EQ(raw.find(k.secret_key_hex()), std::string::npos);
    EXPECT_EQ(raw_state.find(k.secret_key_hex()), std::string::npos);
  }
}

TEST(Certificates, AppendOnlyAndAcl) {
  World w;
  Ledger ledger(w.policy());
  Evidence e = evidence_for(w.alice, "1");
  create_evidence(ledger, w.alice, e).expect_ok();
  EXPECT_TRUE(query_certificates(ledger, w.eve, e.key()).empty());
  create_certificate(ledger, w.ivan, e.key(), CertificateResult::authentic, "all columns match").expect_ok();
  create_certificate(ledger, w.ivan, e.key(), CertificateResult::tampered, "begindate").expect_ok();
  auto certs = query_certificates(ledger, w.eve, e.key());
  ASSERT_EQ(certs.size(), 2u);
  EXPECT_EQ(certs[0].result, CertificateResult::authentic);
  EXPECT_EQ(certs[1].result, CertificateResult::tampered);
  EXPECT_LE(certs[0].date, certs[1].date);
  EXPECT_EQ(certs[0].auditor_user, "ivan");
  EXPECT_EQ(query_certificates(ledger, w.alice, e.key()), certs);
  // Certificate readers do not gain key access.
  EXPECT_EQ(code_of([&] { query_private_key(ledger, w.eve, kPrivateCollection, e.key()); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { query_certificates(ledger, w.mallory, e.key()); }), Errc::access);
  // Only auditors of an authorized org may certify.
  EXPECT_EQ(create_certificate(ledger, w.alice, e.key(), CertificateResult::authentic, "").error,
            Errc::authorization);
  EXPECT_EQ(create_certificate(ledger, w.mallory, e.key(), CertificateResult::authentic, "").error,
            Errc::authorization);
}

namespace {

struct UpdateFixture {
  World w;
  Ledger ledger{w.policy()};
  BatchSubset batch = make_batch({"length", "EndPoint"}, {{"12.5", "J. de Vries"}, {"7.0", "P. Jansen"}},
                                 {"EndPoint"}, "100");
  VerificationRecord old_record;
  std::string key;

  UpdateFixture() {
    batch.table_id = "LowVoltage";
    old_record = rec_gen(id_att_gen(batch, "Electron"), vrfc_att_gen(batch, Traceability::columns));
    Evidence e{"Electron", "LowVoltage", "100", old_record.v.h_v, sha256(std::string_view("ct")),
               Traceability::columns};
    KeyMaterial k = keygen();
    create_evidence(ledger, w.alice, e, &k).expect_ok();
    key = e.key();
  }

  Receipt update(const BatchSubset& mutated, const VerificationRecord* old_rec, const Identity& who) {
    auto rec = rec_gen(id_att_gen(mutated, "Electron"), vrfc_att_gen(mutated, Traceability::columns));
    return update_evidence(ledger, who, key, rec.v.h_v, sha256(std::string_view("ct2")), old_rec, rec, keygen(),
                           "retention period ended");
  }
};

}  // namespace

TEST(Update, GdprOnlyChangeAccepted) {
  UpdateFixture f;
  auto m = erase_columns(f.batch, {"EndPoint"});
  auto r = f.update(m, &f.old_record, f.w.clean);
  ASSERT_TRUE(r.ok()) << r.message;
  Evidence e = query_evidence(f.ledger, f.w.ivan, f.key);
  EXPECT_EQ(e.verification_hash, subset_hash(m));
  auto logs = query_update_logs(f.ledger, f.w.ivan, f.key);
  ASSERT_EQ(logs.size(), 1u);
  EXPECT_EQ(logs[0].old_h_v, f.old_record.v.h_v);
  EXPECT_EQ(logs[0].new_h_v, subset_hash(m));
  EXPECT_EQ(logs[0].reason, "retention period ended");
  EXPECT_EQ(logs[0].user, "cleanup");
}

TEST(Update, NonGdprChangeRejectedWithColumnName) {
  UpdateFixture f;
  auto m = f.batch;
  m.rows[0][0] = "99.9";
  auto root = f.ledger.state_root();
  auto r = f.update(m, &f.old_record, f.w.clean);
  EXPECT_EQ(r.error, Errc::rejected);
  EXPECT_NE(r.message.find("length"), std::string::npos) << r.message;
  EXPECT_EQ(f.ledger.state_root(), root);
  EXPECT_EQ(query_evidence(f.ledger, f.w.ivan, f.key).verification_hash, f.old_record.v.h_v);
}

TEST(Update, IdenticalRecordAcceptedAndLogged) {
  UpdateFixture f;
  auto r = f.update(f.batch, &f.old_record, f.w.clean);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_EQ(query_evidence(f.ledger, f.w.ivan, f.key).verification_hash, f.old_record.v.h_v);
  EXPECT_EQ(query_update_logs(f.ledger, f.w.ivan, f.key).size(), 1u);
}

TEST(Update, MissingOrForgedOldRecordRejected) {
  UpdateFixture f;
  EXPECT_EQ(f.update(f.batch, nullptr, f.w.clean).error, Errc::rejected);
  auto forged = f.old_record;
  forged.v.h_v = sha256(std::string_view("not anchored"));
  EXPECT_EQ(f.update(f.batch, &forged, f.w.clean).error, Errc::rejected);
}

TEST(Update, RowCountAndRoleChecks) {
  UpdateFixture f;
  auto shorter = f.batch;
  shorter.rows.pop_back();
  auto r = f.update(shorter, &f.old_record, f.w.clean);
  EXPECT_EQ(r.error, Errc::rejected);
  EXPECT_EQ(f.update(f.batch, &f.old_record, f.w.alice).error, Errc::authorization);
}

TEST(Update, CleanupClientRestriction) {
  World w;
  AccessPolicy p = w.policy();
  Identity second{"Electron", "script2", "s2"};
  p.add_member(second, {"gdpr"});
  p.set_cleanup_client("Electron/cleanup");
  UpdateFixture f;
  Ledger ledger(p);
  auto e = query_evidence(f.ledger, f.w.ivan, f.key);
  KeyMaterial k = keygen();
  create_evidence(ledger, w.alice, e, &k).expect_ok();
  auto rec = rec_gen(id_att_gen(f.batch, "Electron"), vrfc_att_gen(f.batch, Traceability::columns));
  auto by_second = update_evidence(ledger, second, f.key, rec.v.h_v, e.location_hash, &f.old_record, rec, keygen(), "r");
  EXPECT_EQ(by_second.error, Errc::authorization);
  auto by_cleanup = update_evidence(ledger, w.clean, f.key, rec.v.h_v, e.location_hash, &f.old_record, rec, keygen(), "r");
  EXPECT_TRUE(by_cleanup.ok()) << by_cleanup.message;
}

TEST(Update, ReplacesKeyMaterial) {
  UpdateFixture f;
  auto m = erase_columns(f.batch, {"EndPoint"});
  auto rec = rec_gen(id_att_gen(m, "Electron"), vrfc_att_gen(m, Traceability::columns));
  KeyMaterial fresh = keygen();
  update_evidence(f.ledger, f.w.clean, f.key, rec.v.h_v, sha256(std::string_view("x")), &f.old_record, rec, fresh, "r")
      .expect_ok();
  EXPECT_EQ(query_private_key(f.ledger, f.w.alice, kPrivateCollection, f.key), fresh);
}

TEST(Chain, FaultInjectionAtEveryHeight) {
  World w;
  Ledger ledger(w.policy());
  for (int i = 0; i < 9; ++i) create_evidence(ledger, w.alice, evidence_for(w.alice, std::to_string(i))).expect_ok();
  auto chain = ledger.blocks();
  ASSERT_EQ(chain.size(), 10u);
  EXPECT_TRUE(verify_chain(chain).ok);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    auto bad = chain;
    bad[k].timestamp += "x";
    auto check = verify_chain(bad);
    EXPECT_FALSE(check.ok);
    EXPECT_EQ(check.first_bad_height, k);
    if (!bad[k].txs.empty()) {
      auto bad_tx = chain;
      bad_tx[k].txs[0].args[3] = "forged";
      EXPECT_EQ(verify_chain(bad_tx).first_bad_height, k);
    }
    // Recomputing the hash of the mutated block moves the break to the next one.
    if (k + 1 < chain.size()) {
      bad[k].block_hash = compute_block_hash(bad[k]);
      EXPECT_EQ(verify_chain(bad).first_bad_height, k + 1);
    }
  }
}

TEST(Chain, SerializationRoundTrip) {
  World w;
  Ledger ledger(w.policy());
  create_evidence(ledger, w.alice, evidence_for(w.alice, "1")).expect_ok();
  for (const auto& b : ledger.blocks()) EXPECT_EQ(parse_block(serialize_block(b)), b);
  EXPECT_EQ(code_of([] { parse_block("{not json"); }), Errc::corruption);
}

TEST(Persistence, ReopenRestoresChainAndState) {
  World w;
  TempDir dir;
  LedgerOptions o;
  o.storage_dir = dir.path();
  Evidence e = evidence_for(w.alice, "1");
  KeyMaterial k = keygen();
  std::vector<Block> blocks;
  Digest root;
  {
    Ledger ledger(w.policy(), o);
    create_evidence(ledger, w.alice, e, &k).expect_ok();
    create_certificate(ledger, w.ivan, e.key(), CertificateResult::authentic, "ok").expect_ok();
    blocks = ledger.blocks();
    root = ledger.state_root();
  }
  Ledger reopened(w.policy(), o);
  EXPECT_EQ(reopened.blocks(), blocks);
  EXPECT_EQ(reopened.state_root(), root);
  EXPECT_TRUE(reopened.verify_chain().ok);
  EXPECT_EQ(query_evidence(reopened, w.ivan, e.key()), e);
  EXPECT_EQ(query_private_key(reopened, w.alice, kPrivateCollection, e.key()), k);
  EXPECT_EQ(create_evidence(reopened, w.alice, e).error, Errc::duplicate);
}

TEST(Persistence, TamperedBlockLogDetected) {
  World w;
  TempDir dir;
  LedgerOptions o;
  o.storage_dir = dir.path();
  {
    Ledger ledger(w.policy(), o);
    for (int i = 0; i < 3; ++i) create_evidence(ledger, w.alice, evidence_for(w.alice, std::to_string(i))).expect_ok();
  }
  auto path = dir.path() / "blocks.log";
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  auto pos = raw.find("LowVoltage", raw.size() / 2);
  ASSERT_NE(pos, std::string::npos);
  raw[pos] = 'H';
  f.seekp(0);
  f.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  f.close();
  Ledger reopened(w.policy(), o);
  auto check = reopened.verify_chain();
  EXPECT_FALSE(check.ok);
  ASSERT_TRUE(check.first_bad_height.has_value());
  EXPECT_GE(*check.first_bad_height, 2u);
}

TEST(Concurrency, DuplicateCreateRaceHasOneWinner) {
  World w;
  for (int clients : {2, 5, 20}) {
    Ledger ledger(w.policy());
    Evidence e = evidence_for(w.alice, "race");
    std::atomic<int> winners{0}, duplicates{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < clients; ++i) {
      threads.emplace_back([&, i] {
        Evidence mine = e;
        mine.verification_hash = sha256("client" + std::to_string(i));
        auto r = create_evidence(ledger, w.alice, mine);
        if (r.ok()) ++winners;
        if (r.error == Errc::duplicate) ++duplicates;
      });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(winners, 1);
    EXPECT_EQ(duplicates, clients - 1);
  }
}

TEST(Concurrency, CommittedOrderReplaysToSameState) {
  World w;
  Ledger ledger(w.policy());
  std::vector<Transaction> txs;
  for (int i = 0; i < 40; ++i) {
    const Identity& who = i % 2 == 0 ? w.alice : w.mallory;
    Evidence e = evidence_for(who, std::to_string(i % 25));
    txs.push_back(make_transaction(who, Contract::evidence, "createEvidence",
                                   {e.key(), e.organisation, e.table_name, e.batch_id, e.verification_hash.hex(),
                                    e.location_hash.hex(), "1"}));
  }
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < txs.size(); i += 8) ledger.submit(txs[i]);
    });
  }
  for (auto& t : threads) t.join();

  std::map<std::string, const Transaction*> by_id;
  for (const auto& tx : txs) by_id[tx.tx_id] = &tx;
  Ledger replay(w.policy());
  for (const auto& b : ledger.blocks()) {
    for (const auto& rec : b.txs) {
      auto r = replay.submit(*by_id.at(rec.tx_id));
      EXPECT_EQ(r.ok(), rec.status == TxStatus::valid);
    }
  }
  EXPECT_EQ(replay.public_state(), ledger.public_state());
  EXPECT_EQ(replay.state_root(), ledger.state_root());
}
