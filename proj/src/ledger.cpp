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

#include "auditem/ledger.hpp"

#include <openssl/rand.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "auditem/warehouse.hpp"

namespace auditem {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFunctionCreateEvidence = "createEvidence";
constexpr std::string_view kFunctionQueryEvidence = "queryEvidence";
constexpr std::string_view kFunctionQueryByOwner = "queryEvidenceByOwner";
constexpr std::string_view kFunctionCreatePrivateKey = "createPrivateKey";
constexpr std::string_view kFunctionQueryPrivateKey = "queryPrivateKey";
constexpr std::string_view kFunctionCreateCertificate = "createCertificate";
constexpr std::string_view kFunctionQueryCertificate = "queryCertificate";
constexpr std::string_view kFunctionUpdateEvidence = "updateEvidence";
constexpr std::string_view kFunctionQueryUpdateLog = "queryUpdateLog";

std::string composite_key(std::string_view object_type, std::initializer_list<std::string_view> attrs) {
  std::string key(1, '\0');
  key += object_type;
  key.push_back('\0');
  for (auto a : attrs) {
    key += a;
    key.push_back('\0');
  }
  return key;
}

std::string sequence_suffix(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%012zu", n);
  return buf;
}

void require_args(const std::vector<std::string>& args, std::size_t n, std::string_view function) {
  if (args.size() != n) {
    throw Error(Errc::validation, std::string(function) + " expects " + std::to_string(n) +
                                      " arguments, got " + std::to_string(args.size()));
  }
}

std::string random_hex(std::size_t n) {
  Bytes bytes(n);
  if (RAND_bytes(bytes.data(), static_cast<int>(n)) != 1) {
    throw Error(Errc::environment, "secure randomness source unavailable");
  }
  return to_hex(bytes);
}

std::string private_access_error(std::string_view key, std::string_view detail) {
  return json{{"Error", std::string(key) + std::string(detail)}}.dump();
}

// 256-bit little-endian add / subtract for the multiset state hash.
void accumulate(std::array<std::uint8_t, 32>& acc, const Digest& d, bool add) {
  unsigned carry = 0;
  for (std::size_t i = 0; i < 32; ++i) {
    if (add) {
      unsigned sum = acc[i] + d.raw()[i] + carry;
      acc[i] = static_cast<std::uint8_t>(sum & 0xff);
      carry = sum >> 8;
    } else {
      int diff = static_cast<int>(acc[i]) - d.raw()[i] - static_cast<int>(carry);
      carry = diff < 0 ? 1 : 0;
      acc[i] = static_cast<std::uint8_t>((diff + 256) & 0xff);
    }
  }
}

Digest entry_digest(const std::string& key, const std::string& value) {
  Sha256 h;
  h.update(std::to_string(key.size()));
  h.update('\x1f');
  h.update(key);
  h.update(value);
  return h.finish();
}

void write_file_atomically(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::storage, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::storage, "cannot replace " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json tx_record_json(const TxRecord& r) {
  return json{{"tx_id", r.tx_id},
              {"contract", to_string(r.contract)},
              {"function", r.function},
              {"args", r.args},
              {"org", r.org},
              {"user", r.user},
              {"timestamp", r.timestamp},
              {"signature", r.signature},
              {"status", r.status == TxStatus::valid ? "valid" : "failed"},
              {"message", r.message}};
}

TxRecord tx_record_from_json(const json& j) {
  TxRecord r;
  j.at("tx_id").get_to(r.tx_id);
  r.contract = contract_from_string(j.at("contract").get<std::string>());
  j.at("function").get_to(r.function);
  j.at("args").get_to(r.args);
  j.at("org").get_to(r.org);
  j.at("user").get_to(r.user);
  j.at("timestamp").get_to(r.timestamp);
  j.at("signature").get_to(r.signature);
  r.status = j.at("status").get<std::string>() == "valid" ? TxStatus::valid : TxStatus::failed;
  j.at("message").get_to(r.message);
  return r;
}

struct ParsedKeys {
  std::string secret_key;
  std::string nonce;
  std::string key;
};

ParsedKeys parse_transient_keys(const std::map<std::string, std::string>& transient) {
  auto it = transient.find("keys");
  if (it == transient.end()) throw Error(Errc::validation, "transient map lacks \"keys\"");
  json input;
  try {
    input = json::parse(it->second);
  } catch (const json::exception&) {
    throw Error(Errc::validation, "transient \"keys\" is not JSON");
  }
  ParsedKeys k;
  k.secret_key = input.value("secretKey", "");
  k.nonce = input.value("nonce", "");
  k.key = input.value("key", "");
  if (k.secret_key.empty()) throw Error(Errc::validation, "secretKey must be a non-empty string");
  if (k.nonce.empty()) throw Error(Errc::validation, "nonce must be a non-empty string");
  KeyMaterial::from_hex(k.secret_key, k.nonce);  // shape check
  return k;
}

std::string private_details_json(const ParsedKeys& k) {
  return json{{"secretKey", k.secret_key}, {"nonce", k.nonce}}.dump();
}

std::string transient_keys_json(std::string_view key, const KeyMaterial& m) {
  return json{{"secretKey", m.secret_key_hex()}, {"nonce", m.nonce_hex()}, {"key", key}}.dump();
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// AccessPolicy

void AccessPolicy::add_member(Identity identity, std::set<std::string, std::less<>> roles) {
  if (identity.org.empty() || identity.user.empty()) {
    throw Error(Errc::config, "identity needs org and user");
  }
  if (identity.org.find('|') != std::string::npos || identity.org.find('/') != std::string::npos) {
    throw Error(Errc::config, "organization names must not contain '|' or '/'");
  }
  std::string name = identity.name();
  members_.insert_or_assign(std::move(name), Member{std::move(identity), std::move(roles)});
}

void AccessPolicy::grant_collection(const std::string& owner_org, const std::string& reader_org) {
  collection_grants_[owner_org].insert(reader_org);
}

void AccessPolicy::grant_certificates(const std::string& owner_org, const std::string& reader_org) {
  certificate_grants_[owner_org].insert(reader_org);
}

const AccessPolicy::Member* AccessPolicy::find(std::string_view org, std::string_view user) const {
  auto it = members_.find(std::string(org) + "/" + std::string(user));
  return it == members_.end() ? nullptr : &it->second;
}

Identity AccessPolicy::identity(std::string_view name) const {
  auto it = members_.find(name);
  if (it == members_.end()) throw Error(Errc::config, "unknown identity '" + std::string(name) + "'");
  return it->second.identity;
}

bool AccessPolicy::has_role(std::string_view org, std::string_view user, std::string_view role) const {
  const Member* m = find(org, user);
  return m != nullptr && m->roles.count(role) > 0;
}

bool AccessPolicy::can_read_collection(std::string_view reader_org, std::string_view owner_org) const {
  if (reader_org == owner_org) return true;
  auto it = collection_grants_.find(owner_org);
  return it != collection_grants_.end() && it->second.count(reader_org) > 0;
}

bool AccessPolicy::can_read_certificates(std::string_view reader_org, std::string_view owner_org) const {
  if (can_read_collection(reader_org, owner_org)) return true;
  auto it = certificate_grants_.find(owner_org);
  return it != certificate_grants_.end() && it->second.count(reader_org) > 0;
}

std::vector<std::string> AccessPolicy::member_names() const {
  std::vector<std::string> out;
  for (const auto& [name, m] : members_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Transactions and blocks

std::string_view to_string(Contract c) noexcept {
  switch (c) {
    case Contract::evidence: return "Evidence";
    case Contract::private_keys: return "PrivateKeys";
    case Contract::certificates: return "Certificates";
    case Contract::update: return "Update";
  }
  return "Unknown";
}

Contract contract_from_string(std::string_view name) {
  for (Contract c : {Contract::evidence, Contract::private_keys, Contract::certificates, Contract::update}) {
    if (to_string(c) == name) return c;
  }
  throw Error(Errc::validation, "unknown contract '" + std::string(name) + "'");
}

std::string Transaction::signing_payload() const {
  // Transient values are bound through their digest only.
  Sha256 transient_hash;
  for (const auto& [k, v] : transient) {
    transient_hash.update(std::to_string(k.size()) + ":" + k);
    transient_hash.update(std::to_string(v.size()) + ":" + v);
  }
  json j{{"tx_id", tx_id},   {"contract", to_string(contract)}, {"function", function},
         {"args", args},     {"org", org},                      {"user", user},
         {"timestamp", timestamp}, {"transient", transient_hash.finish().hex()}};
  return j.dump();
}

Transaction make_transaction(const Identity& who, Contract contract, std::string function,
                             std::vector<std::string> args, std::map<std::string, std::string> transient) {
  Transaction tx;
  tx.tx_id = random_hex(16);
  tx.contract = contract;
  tx.function = std::move(function);
  tx.args = std::move(args);
  tx.transient = std::move(transient);
  tx.org = who.org;
  tx.user = who.user;
  tx.timestamp = utc_now_iso8601();
  tx.signature = hmac_sha256(who.secret, tx.signing_payload()).hex();
  return tx;
}

Digest TxRecord::digest() const { return sha256(tx_record_json(*this).dump()); }

Digest compute_block_hash(const Block& block) {
  Sha256 h;
  h.update("block");
  h.update('\x1f');
  h.update(std::to_string(block.height));
  h.update('\x1f');
  h.update(block.prev_hash.hex());
  h.update('\x1f');
  h.update(block.timestamp);
  for (const auto& tx : block.txs) {
    h.update('\x1f');
    h.update(tx.digest().hex());
  }
  h.update('\x1e');
  h.update(block.state_root.hex());
  return h.finish();
}

std::string serialize_block(const Block& block) {
  json txs = json::array();
  for (const auto& tx : block.txs) txs.push_back(tx_record_json(tx));
  return json{{"height", block.height},
              {"prev_hash", block.prev_hash.hex()},
              {"timestamp", block.timestamp},
              {"txs", std::move(txs)},
              {"state_root", block.state_root.hex()},
              {"block_hash", block.block_hash.hex()}}
      .dump();
}

Block parse_block(std::string_view bytes) {
  try {
    json j = json::parse(bytes);
    Block b;
    j.at("height").get_to(b.height);
    b.prev_hash = Digest::from_hex(j.at("prev_hash").get<std::string>());
    j.at("timestamp").get_to(b.timestamp);
    for (const auto& tx : j.at("txs")) b.txs.push_back(tx_record_from_json(tx));
    b.state_root = Digest::from_hex(j.at("state_root").get<std::string>());
    b.block_hash = Digest::from_hex(j.at("block_hash").get<std::string>());
    return b;
  } catch (const json::exception& e) {
    throw Error(Errc::corruption, std::string("unreadable block: ") + e.what());
  }
}

ChainCheck verify_chain(std::span<const Block> chain) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Block& b = chain[i];
    bool good = b.height == i && compute_block_hash(b) == b.block_hash &&
                (i == 0 ? b.prev_hash == Digest{} : b.prev_hash == chain[i - 1].block_hash);
    if (!good) return {false, static_cast<std::uint64_t>(i)};
  }
  return {};
}

std::string_view to_string(ReceiptStatus s) noexcept {
  switch (s) {
    case ReceiptStatus::committed: return "committed";
    case ReceiptStatus::failed: return "failed";
    case ReceiptStatus::rejected: return "rejected";
  }
  return "unknown";
}

const Receipt& Receipt::expect_ok() const {
  if (!ok()) throw Error(error.value_or(Errc::rejected), message);
  return *this;
}

// ---------------------------------------------------------------------------
// Ledger

Ledger::Ledger(AccessPolicy policy, LedgerOptions options)
    : policy_(std::move(policy)), options_(std::move(options)) {
  bool loaded = false;
  if (!options_.storage_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options_.storage_dir, ec);
    if (ec) throw Error(Errc::storage, "cannot create ledger dir " + options_.storage_dir.string());
    if (fs::exists(options_.storage_dir / "blocks.log")) {
      load_from_storage();
      loaded = true;
    }
  }
  if (!loaded) {
    Block genesis;
    genesis.height = 0;
    genesis.timestamp = utc_now_iso8601();
    genesis.state_root = compute_state_root();
    genesis.block_hash = compute_block_hash(genesis);
    blocks_.push_back(genesis);
    if (!options_.storage_dir.empty()) {
      persist_block(genesis);
      persist_snapshot();
    }
  }
  orderer_ = std::thread([this] { order_loop(); });
}

Ledger::~Ledger() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (orderer_.joinable()) orderer_.join();
}

std::future<Receipt> Ledger::submit_async(Transaction tx) {
  std::promise<Receipt> promise;
  std::future<Receipt> future = promise.get_future();
  auto started = std::chrono::steady_clock::now();

  Receipt rejected;
  rejected.tx_id = tx.tx_id;
  rejected.status = ReceiptStatus::rejected;
  const AccessPolicy::Member* member = policy_.find(tx.org, tx.user);
  if (member == nullptr ||
      hmac_sha256(member->identity.secret, tx.signing_payload()).hex() != tx.signature) {
    rejected.error = Errc::invalid_signature;
    rejected.message = "signature of " + tx.org + "/" + tx.user + " does not verify";
    promise.set_value(std::move(rejected));
    return future;
  }
  {
    std::lock_guard lock(queue_mutex_);
    if (stopping_) {
      rejected.error = Errc::environment;
      rejected.message = "ledger is shutting down";
      promise.set_value(std::move(rejected));
      return future;
    }
    queue_.push_back(Pending{std::move(tx), std::move(promise), started});
  }
  queue_cv_.notify_one();
  return future;
}

Receipt Ledger::submit(Transaction tx) { return submit_async(std::move(tx)).get(); }

void Ledger::order_loop() {
  for (;;) {
    Pending pending;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and drained
      pending = std::move(queue_.front());
      queue_.pop_front();
    }
    Receipt receipt;
    try {
      receipt = commit(pending);
    } catch (const Error& e) {
      receipt.tx_id = pending.tx.tx_id;
      receipt.status = ReceiptStatus::rejected;
      receipt.error = e.code();
      receipt.message = e.what();
    }
    receipt.latency = std::chrono::steady_clock::now() - pending.enqueued;
    pending.done.set_value(std::move(receipt));
  }
}

Receipt Ledger::commit(Pending& pending) {
  const Transaction& tx = pending.tx;
  Receipt receipt;
  receipt.tx_id = tx.tx_id;
  if (seen_tx_ids_.count(tx.tx_id) > 0) {
    receipt.status = ReceiptStatus::rejected;
    receipt.error = Errc::duplicate;
    receipt.message = "transaction id " + tx.tx_id + " already ordered";
    return receipt;
  }
  if (options_.commit_delay.count() > 0) std::this_thread::sleep_for(options_.commit_delay);

  WriteSet writes;
  TxRecord record{tx.tx_id, tx.contract, tx.function, tx.args, tx.org, tx.user, tx.timestamp, tx.signature,
                  TxStatus::valid, ""};
  try {
    receipt.payload = execute(tx, writes);
    receipt.status = ReceiptStatus::committed;
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    Errc code = err != nullptr ? err->code() : Errc::validation;
    writes = {};
    record.status = TxStatus::failed;
    record.message = std::string(to_string(code)) + ": " + e.what();
    receipt.status = ReceiptStatus::failed;
    receipt.error = code;
    receipt.message = e.what();
  }

  std::unique_lock lock(state_mutex_);
  apply(writes);
  Block block;
  block.height = blocks_.size();
  block.prev_hash = blocks_.back().block_hash;
  block.timestamp = utc_now_iso8601();
  block.txs.push_back(std::move(record));
  block.state_root = compute_state_root();
  block.block_hash = compute_block_hash(block);
  blocks_.push_back(block);
  seen_tx_ids_.insert(tx.tx_id);
  if (!options_.storage_dir.empty()) {
    persist_block(block);
    persist_snapshot();
  }
  receipt.height = block.height;
  return receipt;
}

void Ledger::apply(WriteSet& writes) {
  for (auto& [key, value] : writes.state) {
    if (value) {
      state_put(key, std::move(*value));
    } else {
      state_erase(key);
    }
  }
  for (auto& [key, entry] : writes.private_data) private_[key] = std::move(entry);
}

void Ledger::state_put(const std::string& key, std::string value) {
  auto it = state_.find(key);
  if (it != state_.end()) {
    accumulate(state_accumulator_, entry_digest(key, it->second), false);
    it->second = std::move(value);
  } else {
    it = state_.emplace(key, std::move(value)).first;
  }
  accumulate(state_accumulator_, entry_digest(key, it->second), true);
}

void Ledger::state_erase(const std::string& key) {
  auto it = state_.find(key);
  if (it == state_.end()) return;
  accumulate(state_accumulator_, entry_digest(key, it->second), false);
  state_.erase(it);
}

Digest Ledger::compute_state_root() const {
  Sha256 h;
  h.update("state");
  h.update(std::to_string(state_.size()));
  h.update(state_accumulator_);
  return h.finish();
}

void Ledger::authenticate(std::string_view org, std::string_view user, std::string_view secret) const {
  const AccessPolicy::Member* m = policy_.find(org, user);
  if (m == nullptr || m->identity.secret != secret) {
    throw Error(Errc::invalid_signature,
                "identity " + std::string(org) + "/" + std::string(user) + " is not recognized");
  }
}

std::string Ledger::query(const Identity& who, Contract contract, std::string_view function,
                          const std::vector<std::string>& args) const {
  authenticate(who.org, who.user, who.secret);
  std::shared_lock lock(state_mutex_);
  return run_query(who, contract, function, args);
}

std::string Ledger::execute(const Transaction& tx, WriteSet& writes) const {
  const std::string& fn = tx.function;
  const auto& args = tx.args;
  auto require_role = [&](std::string_view role) {
    if (!policy_.has_role(tx.org, tx.user, role)) {
      throw Error(Errc::authorization, tx.org + "/" + tx.user + " lacks role " + std::string(role));
    }
  };
  auto find_state = [&](const std::string& key) -> const std::string* {
    auto it = state_.find(key);
    return it == state_.end() ? nullptr : &it->second;
  };
  auto count_prefix = [&](const std::string& prefix) {
    std::size_t n = 0;
    for (auto it = state_.lower_bound(prefix); it != state_.end() && it->first.rfind(prefix, 0) == 0; ++it) ++n;
    return n;
  };

  switch (tx.contract) {
    case Contract::evidence: {
      if (fn != kFunctionCreateEvidence) break;
      require_args(args, 7, fn);
      require_role(roles::uploader);
      Evidence e;
      e.organisation = args[1];
      e.table_name = args[2];
      e.batch_id = args[3];
      e.verification_hash = Digest::from_hex(args[4]);
      e.location_hash = Digest::from_hex(args[5]);
      e.traceability = traceability_from_int(std::stoi(args[6]));
      if (tx.org != e.organisation) {
        throw Error(Errc::authorization, "caller org " + tx.org + " cannot create evidence for " + e.organisation);
      }
      if (args[0] != e.key()) throw Error(Errc::validation, "evidence key does not match org|table|batch");
      if (find_state(args[0]) != nullptr) {
        throw Error(Errc::duplicate, "the batch already exists: " + e.table_name + "/" + e.batch_id);
      }
      if (tx.transient.count("keys") > 0) {
        ParsedKeys keys = parse_transient_keys(tx.transient);
        if (!keys.key.empty() && keys.key != args[0]) {
          throw Error(Errc::validation, "transient key id does not match evidence key");
        }
        if (private_.count({std::string(kPrivateCollection), args[0]}) > 0) {
          throw Error(Errc::duplicate, "private key already stored for " + args[0]);
        }
        writes.private_data[{std::string(kPrivateCollection), args[0]}] =
            PrivateEntry{tx.org, private_details_json(keys)};
      }
      std::string value = json(e).dump();
      writes.state[args[0]] = value;
      writes.state[composite_key("owner_key", {e.organisation, args[0]})] = std::string(1, '\0');
      return value;
    }
    case Contract::private_keys: {
      if (fn != kFunctionCreatePrivateKey) break;
      if (!policy_.has_role(tx.org, tx.user, roles::uploader) && !policy_.has_role(tx.org, tx.user, roles::gdpr)) {
        throw Error(Errc::authorization, tx.org + "/" + tx.user + " may not store private keys");
      }
      ParsedKeys keys = parse_transient_keys(tx.transient);
      if (keys.key.empty()) throw Error(Errc::validation, "key must be a non-empty string");
      auto existing = private_.find({std::string(kPrivateCollection), keys.key});
      if (existing != private_.end()) {
        if (existing->second.owner_org != tx.org) {
          throw Error(Errc::access, private_access_error(keys.key, ": owned by another organization"));
        }
        throw Error(Errc::duplicate, "private key already stored for " + keys.key);
      }
      std::string details = private_details_json(keys);
      writes.private_data[{std::string(kPrivateCollection), keys.key}] = PrivateEntry{tx.org, details};
      return "{}";  // the material is not echoed into receipts
    }
    case Contract::certificates: {
      if (fn != kFunctionCreateCertificate) break;
      require_args(args, 3, fn);
      require_role(roles::auditor);
      const std::string* raw = find_state(args[0]);
      if (raw == nullptr) throw Error(Errc::not_found, "no evidence for key " + args[0]);
      Evidence e = json::parse(*raw).get<Evidence>();
      if (!policy_.can_read_collection(tx.org, e.organisation)) {
        throw Error(Errc::authorization, tx.org + " may not certify evidence of " + e.organisation);
      }
      Certificate c;
      c.evidence_key = args[0];
      c.date = tx.timestamp;
      c.auditor_org = tx.org;
      c.auditor_user = tx.user;
      if (args[1] == to_string(CertificateResult::authentic)) {
        c.result = CertificateResult::authentic;
      } else if (args[1] == to_string(CertificateResult::tampered)) {
        c.result = CertificateResult::tampered;
      } else {
        throw Error(Errc::validation, "certificate result must be Authentic or Tampered");
      }
      c.detail = args[2];
      c.tx_id = tx.tx_id;
      std::string prefix = composite_key("certificate", {args[0]});
      std::string value = json(c).dump();
      writes.state[prefix + sequence_suffix(count_prefix(prefix))] = value;
      return value;
    }
    case Contract::update: {
      if (fn != kFunctionUpdateEvidence) break;
      require_args(args, 4, fn);
      const std::string name = tx.org + "/" + tx.user;
      if (const auto& cleanup = policy_.cleanup_client()) {
        if (*cleanup != name) throw Error(Errc::authorization, "only " + *cleanup + " may run GDPR updates");
      } else {
        require_role(roles::gdpr);
      }
      const std::string& key = args[0];
      const std::string* raw = find_state(key);
      if (raw == nullptr) throw Error(Errc::not_found, "no evidence for key " + key);
      Evidence e = json::parse(*raw).get<Evidence>();
      if (tx.org != e.organisation) {
        throw Error(Errc::authorization, tx.org + " cannot update evidence of " + e.organisation);
      }
      Digest new_h_v = Digest::from_hex(args[1]);
      Digest new_h_l = Digest::from_hex(args[2]);

      auto old_it = tx.transient.find("oldRecord");
      auto new_it = tx.transient.find("newRecord");
      if (old_it == tx.transient.end() || old_it->second.empty()) {
        throw Error(Errc::rejected, "missing old verification record");
      }
      if (new_it == tx.transient.end() || new_it->second.empty()) {
        throw Error(Errc::rejected, "missing new verification record");
      }
      VerificationRecord old_rec = parse_record(old_it->second);
      VerificationRecord new_rec = parse_record(new_it->second);
      if (old_rec.v.h_v != e.verification_hash || old_rec.v.traceability != e.traceability) {
        throw Error(Errc::rejected, "old record does not match the anchored evidence");
      }
      auto same_batch = [&](const IdentificationAttribute& id) {
        return id.organization == e.organisation && id.table_id == e.table_name && id.batch_id == e.batch_id;
      };
      if (!same_batch(old_rec.id) || !same_batch(new_rec.id)) {
        throw Error(Errc::rejected, "records identify a different batch");
      }
      if (new_rec.v.h_v != new_h_v) throw Error(Errc::rejected, "new h_v does not match the new record");
      const auto& ov = old_rec.v;
      const auto& nv = new_rec.v;
      if (ov.cols != nv.cols || ov.traceability != nv.traceability || ov.gdpr != nv.gdpr) {
        throw Error(Errc::rejected, "column set, GDPR columns or traceability level changed");
      }
      if (ov.rows != nv.rows) {
        throw Error(Errc::rejected, "row count changed from " + std::to_string(ov.rows) + " to " +
                                        std::to_string(nv.rows));
      }
      std::set<std::string> mutable_cols(ov.gdpr.begin(), ov.gdpr.end());
      std::vector<std::string> offending;
      for (std::size_t c = 0; c < ov.cols.size(); ++c) {
        if (mutable_cols.count(ov.cols[c]) > 0) continue;
        bool differs = false;
        if (ov.col_hash) {
          differs = (*ov.col_hash)[c] != (*nv.col_hash)[c];
        } else {
          for (std::size_t r = 0; r < ov.rows && !differs; ++r) differs = (*ov.data)[r][c] != (*nv.data)[r][c];
        }
        if (differs) offending.push_back(ov.cols[c]);
      }
      if (!offending.empty()) {
        throw Error(Errc::rejected, "non-GDPR columns changed: " + join(offending));
      }
      if (ov.gdpr_hash != nv.gdpr_hash) throw Error(Errc::rejected, "GDPR-exempt hash changed");

      ParsedKeys keys = parse_transient_keys(tx.transient);
      UpdateLog log{key, e.verification_hash, new_h_v, e.location_hash, new_h_l, tx.org, tx.user, args[3], tx.timestamp};
      e.verification_hash = new_h_v;
      e.location_hash = new_h_l;
      std::string value = json(e).dump();
      writes.state[key] = value;
      std::string prefix = composite_key("update_log", {key});
      writes.state[prefix + sequence_suffix(count_prefix(prefix))] = json(log).dump();
      writes.private_data[{std::string(kPrivateCollection), key}] = PrivateEntry{tx.org, private_details_json(keys)};
      return value;
    }
  }
  throw Error(Errc::validation, "unknown function " + std::string(to_string(tx.contract)) + "." + fn);
}

std::string Ledger::run_query(const Identity& who, Contract contract, std::string_view fn,
                              const std::vector<std::string>& args) const {
  auto evidence_owner = [&](const std::string& key) {
    auto it = state_.find(key);
    if (it == state_.end()) throw Error(Errc::not_found, "no evidence for key " + key);
    return json::parse(it->second).get<Evidence>().organisation;
  };
  auto scan = [&](const std::string& prefix) {
    json out = json::array();
    for (auto it = state_.lower_bound(prefix); it != state_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
      out.push_back(json::parse(it->second));
    }
    return out.dump();
  };

  if (contract == Contract::evidence && fn == kFunctionQueryEvidence) {
    require_args(args, 1, fn);
    auto it = state_.find(args[0]);
    if (it == state_.end()) throw Error(Errc::not_found, "no evidence for key " + args[0]);
    return it->second;
  }
  if (contract == Contract::evidence && fn == kFunctionQueryByOwner) {
    require_args(args, 1, fn);
    std::string prefix = composite_key("owner_key", {args[0]});
    json keys = json::array();
    for (auto it = state_.lower_bound(prefix); it != state_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
      std::string rest = it->first.substr(prefix.size());
      keys.push_back(rest.substr(0, rest.find('\0')));
    }
    return keys.dump();
  }
  if (contract == Contract::private_keys && fn == kFunctionQueryPrivateKey) {
    require_args(args, 2, fn);
    auto it = private_.find({args[0], args[1]});
    if (it == private_.end()) throw Error(Errc::not_found, private_access_error(args[1], ""));
    if (!policy_.can_read_collection(who.org, it->second.owner_org)) {
      throw Error(Errc::access, private_access_error(args[1], ": access denied for " + who.org));
    }
    return it->second.value;
  }
  if (contract == Contract::certificates && fn == kFunctionQueryCertificate) {
    require_args(args, 1, fn);
    if (!policy_.can_read_certificates(who.org, evidence_owner(args[0]))) {
      throw Error(Errc::access, who.org + " may not read certificates for " + args[0]);
    }
    return scan(composite_key("certificate", {args[0]}));
  }
  if (contract == Contract::update && fn == kFunctionQueryUpdateLog) {
    require_args(args, 1, fn);
    if (!policy_.can_read_certificates(who.org, evidence_owner(args[0]))) {
      throw Error(Errc::access, who.org + " may not read update logs for " + args[0]);
    }
    return scan(composite_key("update_log", {args[0]}));
  }
  throw Error(Errc::validation, "unknown query " + std::string(to_string(contract)) + "." + std::string(fn));
}

std::uint64_t Ledger::height() const {
  std::shared_lock lock(state_mutex_);
  return blocks_.size() - 1;
}

std::size_t Ledger::block_count() const {
  std::shared_lock lock(state_mutex_);
  return blocks_.size();
}

Block Ledger::block(std::uint64_t height) const {
  std::shared_lock lock(state_mutex_);
  if (height >= blocks_.size()) throw Error(Errc::bounds, "no block at height " + std::to_string(height));
  return blocks_[height];
}

std::vector<Block> Ledger::blocks() const {
  std::shared_lock lock(state_mutex_);
  return blocks_;
}

Digest Ledger::state_root() const {
  std::shared_lock lock(state_mutex_);
  return compute_state_root();
}

ChainCheck Ledger::verify_chain() const {
  std::shared_lock lock(state_mutex_);
  ChainCheck check = auditem::verify_chain(blocks_);
  if (check.ok && blocks_.back().state_root != compute_state_root()) {
    return {false, blocks_.back().height};
  }
  return check;
}

std::map<std::string, std::string> Ledger::public_state() const {
  std::shared_lock lock(state_mutex_);
  return state_;
}

void Ledger::persist_block(const Block& block) {
  std::string bytes = serialize_block(block);
  std::ofstream out(options_.storage_dir / "blocks.log", std::ios::binary | std::ios::app);
  std::uint64_t len = bytes.size();
  std::array<char, 8> prefix{};
  for (int i = 0; i < 8; ++i) prefix[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  out.write(prefix.data(), prefix.size());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::storage, "cannot append block " + std::to_string(block.height));
}

void Ledger::persist_snapshot() const {
  json state = json::object();
  for (const auto& [k, v] : state_) state[k] = v;
  write_file_atomically(options_.storage_dir / "state.json", state.dump());
  json priv = json::array();
  for (const auto& [k, entry] : private_) {
    priv.push_back({{"collection", k.first}, {"key", k.second}, {"owner", entry.owner_org}, {"value", entry.value}});
  }
  write_file_atomically(options_.storage_dir / "private.json", priv.dump());
}

void Ledger::load_from_storage() {
  std::string log = read_file(options_.storage_dir / "blocks.log");
  std::size_t pos = 0;
  while (pos < log.size()) {
    if (log.size() - pos < 8) throw Error(Errc::corruption, "truncated block length prefix");
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<std::uint8_t>(log[pos + i]);
    pos += 8;
    if (log.size() - pos < len) throw Error(Errc::corruption, "truncated block body");
    blocks_.push_back(parse_block(std::string_view(log).substr(pos, len)));
    for (const auto& tx : blocks_.back().txs) seen_tx_ids_.insert(tx.tx_id);
    pos += len;
  }
  if (blocks_.empty()) throw Error(Errc::corruption, "block log holds no genesis block");
  try {
    json state = json::parse(read_file(options_.storage_dir / "state.json"));
    for (auto& [k, v] : state.items()) state_put(k, v.get<std::string>());
    fs::path priv_path = options_.storage_dir / "private.json";
    if (fs::exists(priv_path)) {
      for (const auto& entry : json::parse(read_file(priv_path))) {
        private_[{entry.at("collection").get<std::string>(), entry.at("key").get<std::string>()}] =
            PrivateEntry{entry.at("owner").get<std::string>(), entry.at("value").get<std::string>()};
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::corruption, std::string("unreadable state snapshot: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Records and contract clients

std::string evidence_key(std::string_view org, std::string_view table, std::string_view batch) {
  for (auto field : {org, table, batch}) {
    if (field.empty() || field.find('|') != std::string_view::npos) {
      throw Error(Errc::validation, "evidence key fields must be non-empty and free of '|'");
    }
  }
  std::string framed;
  framed.append(org).append("|").append(table).append("|").append(batch);
  return sha256(framed).hex();
}

std::string_view to_string(CertificateResult r) noexcept {
  return r == CertificateResult::authentic ? "Authentic" : "Tampered";
}

void to_json(json& j, const Evidence& e) {
  j = json{{"Organisation", e.organisation},
           {"Table_name", e.table_name},
           {"Batch_ID", e.batch_id},
           {"Verification_Hash", e.verification_hash.hex()},
           {"Location_Hash", e.location_hash.hex()},
           {"Traceability", to_int(e.traceability)}};
}

void from_json(const json& j, Evidence& e) {
  j.at("Organisation").get_to(e.organisation);
  j.at("Table_name").get_to(e.table_name);
  j.at("Batch_ID").get_to(e.batch_id);
  e.verification_hash = Digest::from_hex(j.at("Verification_Hash").get<std::string>());
  e.location_hash = Digest::from_hex(j.at("Location_Hash").get<std::string>());
  e.traceability = traceability_from_int(j.at("Traceability").get<int>());
}

void to_json(json& j, const Certificate& c) {
  j = json{{"evidence_key", c.evidence_key}, {"date", c.date},         {"auditor_org", c.auditor_org},
           {"auditor_user", c.auditor_user}, {"result", to_string(c.result)}, {"detail", c.detail},
           {"tx_id", c.tx_id}};
}

void from_json(const json& j, Certificate& c) {
  j.at("evidence_key").get_to(c.evidence_key);
  j.at("date").get_to(c.date);
  j.at("auditor_org").get_to(c.auditor_org);
  j.at("auditor_user").get_to(c.auditor_user);
  c.result = j.at("result").get<std::string>() == "Authentic" ? CertificateResult::authentic
                                                              : CertificateResult::tampered;
  j.at("detail").get_to(c.detail);
  j.at("tx_id").get_to(c.tx_id);
}

void to_json(json& j, const UpdateLog& u) {
  j = json{{"evidence_key", u.evidence_key}, {"old_h_v", u.old_h_v.hex()}, {"new_h_v", u.new_h_v.hex()},
           {"old_h_l", u.old_h_l.hex()},     {"new_h_l", u.new_h_l.hex()}, {"org", u.org},
           {"user", u.user},                 {"reason", u.reason},         {"timestamp", u.timestamp}};
}

void from_json(const json& j, UpdateLog& u) {
  j.at("evidence_key").get_to(u.evidence_key);
  u.old_h_v = Digest::from_hex(j.at("old_h_v").get<std::string>());
  u.new_h_v = Digest::from_hex(j.at("new_h_v").get<std::string>());
  u.old_h_l = Digest::from_hex(j.at("old_h_l").get<std::string>());
  u.new_h_l = Digest::from_hex(j.at("new_h_l").get<std::string>());
  j.at("org").get_to(u.org);
  j.at("user").get_to(u.user);
  j.at("reason").get_to(u.reason);
  j.at("timestamp").get_to(u.timestamp);
}

Receipt create_evidence(Ledger& ledger, const Identity& who, const Evidence& e, const KeyMaterial* keys) {
  std::string key = e.key();
  std::map<std::string, std::string> transient;
  if (keys != nullptr) transient["keys"] = transient_keys_json(key, *keys);
  return ledger.submit(make_transaction(
      who, Contract::evidence, std::string(kFunctionCreateEvidence),
      {key, e.organisation, e.table_name, e.batch_id, e.verification_hash.hex(), e.location_hash.hex(),
       std::to_string(to_int(e.traceability))},
      std::move(transient)));
}

Evidence query_evidence(const Ledger& ledger, const Identity& who, std::string_view key) {
  return json::parse(ledger.query(who, Contract::evidence, kFunctionQueryEvidence, {std::string(key)}))
      .get<Evidence>();
}

std::vector<std::string> query_evidence_by_owner(const Ledger& ledger, const Identity& who, std::string_view org) {
  return json::parse(ledger.query(who, Contract::evidence, kFunctionQueryByOwner, {std::string(org)}))
      .get<std::vector<std::string>>();
}

Receipt create_private_key(Ledger& ledger, const Identity& who, std::string_view key, const KeyMaterial& material) {
  return ledger.submit(make_transaction(who, Contract::private_keys, std::string(kFunctionCreatePrivateKey), {},
                                        {{"keys", transient_keys_json(key, material)}}));
}

KeyMaterial query_private_key(const Ledger& ledger, const Identity& who, std::string_view collection,
                              std::string_view key) {
  json details = json::parse(ledger.query(who, Contract::private_keys, kFunctionQueryPrivateKey,
                                          {std::string(collection), std::string(key)}));
  return KeyMaterial::from_hex(details.at("secretKey").get<std::string>(), details.at("nonce").get<std::string>());
}

Receipt create_certificate(Ledger& ledger, const Identity& who, std::string_view evidence_key,
                           CertificateResult result, std::string_view detail) {
  return ledger.submit(make_transaction(who, Contract::certificates, std::string(kFunctionCreateCertificate),
                                        {std::string(evidence_key), std::string(to_string(result)), std::string(detail)}));
}

std::vector<Certificate> query_certificates(const Ledger& ledger, const Identity& who, std::string_view evidence_key) {
  return json::parse(ledger.query(who, Contract::certificates, kFunctionQueryCertificate, {std::string(evidence_key)}))
      .get<std::vector<Certificate>>();
}

Receipt update_evidence(Ledger& ledger, const Identity& who, std::string_view key, const Digest& new_h_v,
                        const Digest& new_h_l, const VerificationRecord* old_record,
                        const VerificationRecord& new_record, const KeyMaterial& new_keys, std::string_view reason) {
  std::map<std::string, std::string> transient{{"newRecord", canonical_bytes(new_record)},
                                               {"keys", transient_keys_json(key, new_keys)}};
  if (old_record != nullptr) transient["oldRecord"] = canonical_bytes(*old_record);
  return ledger.submit(make_transaction(who, Contract::update, std::string(kFunctionUpdateEvidence),
                                        {std::string(key), new_h_v.hex(), new_h_l.hex(), std::string(reason)},
                                        std::move(transient)));
}

std::vector<UpdateLog> query_update_logs(const Ledger& ledger, const Identity& who, std::string_view key) {
  return json::parse(ledger.query(who, Contract::update, kFunctionQueryUpdateLog, {std::string(key)}))
      .get<std::vector<UpdateLog>>();
}

}  // namespace auditem
