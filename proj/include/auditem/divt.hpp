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

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auditem/attributes.hpp"
#include "auditem/cas.hpp"
#include "auditem/ledger.hpp"
#include "auditem/warehouse.hpp"

namespace auditem {

enum class Verdict { authentic, tampered, missing_evidence, record_compromised, failed };
std::string_view to_string(Verdict v) noexcept;

/// Outcome of checking one batch. Authentic exactly when every change list
/// is empty and the row count is unchanged.
struct TamperReport {
  std::string table_id;
  std::string batch_id;
  std::string evidence_key;
  Verdict verdict = Verdict::authentic;
  std::vector<std::string> changed_columns;
  std::vector<std::size_t> changed_rows;
  std::vector<CellChange> changed_cells;
  std::int64_t row_count_delta = 0;
  bool deep = false;  // produced by verify2
  std::string notes;

  std::string summary() const;
};

void to_json(nlohmann::json& j, const TamperReport& r);

struct UploadResult {
  std::string evidence_key;
  Digest h_v;
  LocationHash h_l;
  std::uint64_t height = 0;
};

struct Verify1Result {
  std::string evidence_key;
  bool evidence_found = false;
  bool match = false;
  Digest h_v;                       // recomputed from the live batch
  std::optional<Digest> h_v_chain;  // anchored on the ledger
};

/// Wall-clock time accumulated per protocol stage.
class StageTimings {
 public:
  enum Stage : std::size_t {
    retrieve_identification,
    create_attributes,
    encrypt,
    send_to_store,
    send_to_ledger,
    verify1,
    verify2,
    upload,
    kStageCount
  };

  static std::string_view name(Stage s) noexcept;
  void add(Stage s, std::chrono::nanoseconds d) noexcept { nanos_[s] += d.count(); }
  double seconds(Stage s) const noexcept { return static_cast<double>(nanos_[s].load()) * 1e-9; }
  void reset() noexcept {
    for (auto& n : nanos_) n = 0;
  }

 private:
  std::array<std::atomic<std::int64_t>, kStageCount> nanos_{};
};

struct DivtCounters {
  std::atomic<std::size_t> verify1_runs{0};
  std::atomic<std::size_t> verify2_runs{0};
  std::atomic<std::size_t> decryptions{0};
};

/// Drives the upload, verification and GDPR flows against one ledger and
/// one content store. Safe to use from several threads for distinct batches.
class Divt {
 public:
  Divt(Ledger& ledger, ContentStore& store) : ledger_(ledger), store_(store) {}

  /// Anchors the batch for the caller's organization. Throws Errc::duplicate
  /// before any write when evidence already exists; other failures carry the
  /// failing stage in the message and leave no evidence on the ledger.
  UploadResult upload(const BatchSubset& batch, Traceability level, const Identity& who);

  /// Hash-only comparison against the anchored h_v. Writes nothing.
  Verify1Result verify1(const BatchSubset& batch, const Identity& who);

  /// Deep comparison against the decrypted off-chain record, at the level
  /// recorded on the ledger. Appends an Authentic or Tampered certificate.
  TamperReport verify2(const BatchSubset& batch, const Identity& who);

  /// Tiered audit: verify1 per batch, verify2 only on mismatch. Per-batch
  /// errors become Failed reports.
  std::vector<TamperReport> audit(const BatchRegistry& warehouse, std::string_view table_id,
                                  std::span<const std::string> batch_ids, const Identity& who);

  /// Re-anchors a batch whose GDPR-flagged cells were erased. The update
  /// contract rejects any change outside GDPR columns (Errc::rejected).
  Receipt gdpr_delete(const BatchSubset& mutated, std::string_view reason, const Identity& who);

  std::vector<Certificate> external_audit(std::string_view evidence_key, const Identity& who) const;

  const DivtCounters& counters() const noexcept { return counters_; }
  void set_timings(StageTimings* timings) noexcept { timings_ = timings; }

 private:
  struct Anchored {
    Evidence evidence;
    VerificationRecord record;
    KeyMaterial keys;
  };
  Anchored fetch_anchored(const std::string& key, const Evidence& evidence, const Identity& who);
  template <class F>
  auto timed(StageTimings::Stage stage, F&& f);

  Ledger& ledger_;
  ContentStore& store_;
  DivtCounters counters_;
  StageTimings* timings_ = nullptr;
};

}  // namespace auditem
