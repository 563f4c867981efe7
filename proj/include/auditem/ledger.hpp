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
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include "auditem/attributes.hpp"
#include "auditem/crypto.hpp"
#include "auditem/digest.hpp"
#include "auditem/error.hpp"

namespace auditem {

// ---------------------------------------------------------------------------
// Identities and authorization

namespace roles {
inline constexpr std::string_view uploader = "uploader";
inline constexpr std::string_view auditor = "auditor";
inline constexpr std::string_view external_auditor = "external_auditor";
inline constexpr std::string_view gdpr = "gdpr";
}  // namespace roles

/// A signing identity. The secret stands in for a CA-issued key pair: the
/// ledger holds the same secret in its AccessPolicy and checks HMACs.
struct Identity {
  std::string org;
  std::string user;
  std::string secret;

  std::string name() const { return org + "/" + user; }
};

/// Static org/role table plus read grants between organizations.
class AccessPolicy {
 public:
  struct Member {
    Identity identity;
    std::set<std::string, std::less<>> roles;
  };

  void add_member(Identity identity, std::set<std::string, std::less<>> roles);
  /// Lets `reader_org` read `owner_org`'s private collection entries.
  void grant_collection(const std::string& owner_org, const std::string& reader_org);
  /// Lets `reader_org` read certificates for `owner_org`'s evidence.
  void grant_certificates(const std::string& owner_org, const std::string& reader_org);
  /// Restricts GDPR updates to exactly this identity ("org/user").
  void set_cleanup_client(std::string name) { cleanup_client_ = std::move(name); }

  const Member* find(std::string_view org, std::string_view user) const;
  /// Looks up "org/user"; throws Errc::config when absent.
  Identity identity(std::string_view name) const;
  bool has_role(std::string_view org, std::string_view user, std::string_view role) const;
  bool can_read_collection(std::string_view reader_org, std::string_view owner_org) const;
  bool can_read_certificates(std::string_view reader_org, std::string_view owner_org) const;
  const std::optional<std::string>& cleanup_client() const noexcept { return cleanup_client_; }
  std::vector<std::string> member_names() const;

 private:
  std::map<std::string, Member, std::less<>> members_;  // keyed by "org/user"
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> collection_grants_;
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> certificate_grants_;
  std::optional<std::string> cleanup_client_;
};

// ---------------------------------------------------------------------------
// Transactions and blocks

enum class Contract { evidence, private_keys, certificates, update };
std::string_view to_string(Contract c) noexcept;
Contract contract_from_string(std::string_view name);

struct Transaction {
  std::string tx_id;
  Contract contract = Contract::evidence;
  std::string function;
  std::vector<std::string> args;
  /// Private inputs. Never written to blocks or public state.
  std::map<std::string, std::string> transient;
  std::string org;
  std::string user;
  std::string timestamp;
  std::string signature;  // hex HMAC over signing_payload()

  std::string signing_payload() const;
};

/// Builds a transaction with a fresh tx id and the identity's signature.
Transaction make_transaction(const Identity& who, Contract contract, std::string function,
                             std::vector<std::string> args,
                             std::map<std::string, std::string> transient = {});

enum class TxStatus { valid, failed };

/// A transaction as stored in a block: transient inputs stripped, outcome kept.
struct TxRecord {
  std::string tx_id;
  Contract contract = Contract::evidence;
  std::string function;
  std::vector<std::string> args;
  std::string org;
  std::string user;
  std::string timestamp;
  std::string signature;
  TxStatus status = TxStatus::valid;
  std::string message;

  Digest digest() const;
  friend bool operator==(const TxRecord&, const TxRecord&) = default;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash;
  std::string timestamp;
  std::vector<TxRecord> txs;
  Digest state_root;
  Digest block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

/// SHA-256 over (height, prev_hash, timestamp, tx digests, state_root).
Digest compute_block_hash(const Block& block);

std::string serialize_block(const Block& block);
Block parse_block(std::string_view bytes);

struct ChainCheck {
  bool ok = true;
  std::optional<std::uint64_t> first_bad_height;
};

/// Recomputes every block hash and back-link, starting at genesis.
ChainCheck verify_chain(std::span<const Block> chain);

enum class ReceiptStatus { committed, failed, rejected };
std::string_view to_string(ReceiptStatus s) noexcept;

struct Receipt {
  std::string tx_id;
  ReceiptStatus status = ReceiptStatus::rejected;
  std::optional<std::uint64_t> height;
  std::optional<Errc> error;
  std::string message;
  std::string payload;
  std::chrono::duration<double> latency{0};

  bool ok() const noexcept { return status == ReceiptStatus::committed; }
  /// Throws Error(error, message) unless committed.
  const Receipt& expect_ok() const;
};

// ---------------------------------------------------------------------------
// The ledger

struct LedgerOptions {
  /// Artificial consensus delay applied to every commit.
  std::chrono::microseconds commit_delay{0};
  /// Empty keeps everything in memory. Otherwise blocks.log (length-prefixed
  /// blocks), state.json and private.json live here.
  std::filesystem::path storage_dir;
};

/// Simulated permissioned ledger. All mutation goes through submit(), which
/// hands the transaction to a single ordering thread; queries read the
/// committed state concurrently and never append blocks.
class Ledger {
 public:
  explicit Ledger(AccessPolicy policy, LedgerOptions options = {});
  ~Ledger();
  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  /// Blocks until the transaction is committed (valid or failed) or rejected.
  Receipt submit(Transaction tx);
  std::future<Receipt> submit_async(Transaction tx);

  /// Read-only contract call. Throws Error on contract or access errors.
  std::string query(const Identity& who, Contract contract, std::string_view function,
                    const std::vector<std::string>& args) const;

  std::uint64_t height() const;
  std::size_t block_count() const;
  Block block(std::uint64_t height) const;
  std::vector<Block> blocks() const;
  Digest state_root() const;
  ChainCheck verify_chain() const;
  const AccessPolicy& policy() const noexcept { return policy_; }

  /// Raw public state entries, for inspection tools.
  std::map<std::string, std::string> public_state() const;

 private:
  struct Pending {
    Transaction tx;
    std::promise<Receipt> done;
    std::chrono::steady_clock::time_point enqueued;
  };
  struct PrivateEntry {
    std::string owner_org;
    std::string value;
  };
  struct WriteSet {
    std::map<std::string, std::optional<std::string>> state;
    std::map<std::pair<std::string, std::string>, PrivateEntry> private_data;
  };

  void order_loop();
  Receipt commit(Pending& pending);
  std::string execute(const Transaction& tx, WriteSet& writes) const;
  std::string run_query(const Identity& who, Contract contract, std::string_view function,
                        const std::vector<std::string>& args) const;
  void authenticate(std::string_view org, std::string_view user, std::string_view secret) const;
  void apply(WriteSet& writes);
  void state_put(const std::string& key, std::string value);
  void state_erase(const std::string& key);
  Digest compute_state_root() const;
  void persist_block(const Block& block);
  void persist_snapshot() const;
  void load_from_storage();

  AccessPolicy policy_;
  LedgerOptions options_;

  mutable std::shared_mutex state_mutex_;
  std::vector<Block> blocks_;
  std::map<std::string, std::string> state_;
  std::map<std::pair<std::string, std::string>, PrivateEntry> private_;
  std::array<std::uint8_t, 32> state_accumulator_{};
  std::unordered_set<std::string> seen_tx_ids_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<Pending> queue_;
  bool stopping_ = false;
  std::thread orderer_;
};

// ---------------------------------------------------------------------------
// On-ledger records and typed contract clients

inline constexpr std::string_view kPrivateCollection = "collectionPrivateDetails";

/// SHA-256 hex of "org|table|batch".
std::string evidence_key(std::string_view org, std::string_view table, std::string_view batch);

struct Evidence {
  std::string organisation;
  std::string table_name;
  std::string batch_id;
  Digest verification_hash;
  Digest location_hash;
  Traceability traceability = Traceability::columns;

  std::string key() const { return evidence_key(organisation, table_name, batch_id); }
  friend bool operator==(const Evidence&, const Evidence&) = default;
};

enum class CertificateResult { authentic, tampered };
std::string_view to_string(CertificateResult r) noexcept;

struct Certificate {
  std::string evidence_key;
  std::string date;
  std::string auditor_org;
  std::string auditor_user;
  CertificateResult result = CertificateResult::authentic;
  std::string detail;
  std::string tx_id;

  friend bool operator==(const Certificate&, const Certificate&) = default;
};

struct UpdateLog {
  std::string evidence_key;
  Digest old_h_v;
  Digest new_h_v;
  Digest old_h_l;
  Digest new_h_l;
  std::string org;
  std::string user;
  std::string reason;
  std::string timestamp;

  friend bool operator==(const UpdateLog&, const UpdateLog&) = default;
};

void to_json(nlohmann::json& j, const Evidence& e);
void from_json(const nlohmann::json& j, Evidence& e);
void to_json(nlohmann::json& j, const Certificate& c);
void from_json(const nlohmann::json& j, Certificate& c);
void to_json(nlohmann::json& j, const UpdateLog& u);
void from_json(const nlohmann::json& j, UpdateLog& u);

/// Creates the evidence; when `keys` is given the key material is written to
/// the owner's private collection in the same transaction.
Receipt create_evidence(Ledger& ledger, const Identity& who, const Evidence& evidence,
                        const KeyMaterial* keys = nullptr);
Evidence query_evidence(const Ledger& ledger, const Identity& who, std::string_view key);
std::vector<std::string> query_evidence_by_owner(const Ledger& ledger, const Identity& who,
                                                 std::string_view org);

Receipt create_private_key(Ledger& ledger, const Identity& who, std::string_view key,
                           const KeyMaterial& material);
KeyMaterial query_private_key(const Ledger& ledger, const Identity& who, std::string_view collection,
                              std::string_view key);

Receipt create_certificate(Ledger& ledger, const Identity& who, std::string_view evidence_key,
                           CertificateResult result, std::string_view detail);
std::vector<Certificate> query_certificates(const Ledger& ledger, const Identity& who,
                                            std::string_view evidence_key);

/// GDPR update. Records and the replacement key material travel as
/// transient inputs; the contract accepts only when every non-GDPR column
/// hash, the GDPR-exempt hash, the column set, level and row count match.
Receipt update_evidence(Ledger& ledger, const Identity& who, std::string_view key,
                        const Digest& new_h_v, const Digest& new_h_l,
                        const VerificationRecord* old_record, const VerificationRecord& new_record,
                        const KeyMaterial& new_keys, std::string_view reason);
std::vector<UpdateLog> query_update_logs(const Ledger& ledger, const Identity& who,
                                         std::string_view key);

}  // namespace auditem
