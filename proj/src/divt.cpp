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

#include "auditem/divt.hpp"

#include <algorithm>
#include <set>

#include "auditem/crypto.hpp"
#include "auditem/error.hpp"

namespace auditem {

using nlohmann::json;

namespace {

// Thrown internally when the off-chain side cannot be trusted.
struct CompromisedRecord {
  std::string reason;
};

BatchSubset with_gdpr_flags(BatchSubset batch, const std::vector<std::string>& gdpr) {
  std::set<std::string> flagged(gdpr.begin(), gdpr.end());
  for (auto& column : batch.schema) column.gdpr = flagged.count(column.name) > 0;
  return batch;
}

TamperReport blank_report(const BatchSubset& batch, const std::string& key) {
  TamperReport r;
  r.table_id = batch.table_id;
  r.batch_id = batch.batch_id;
  r.evidence_key = key;
  return r;
}

std::optional<Evidence> find_evidence(const Ledger& ledger, const Identity& who, const std::string& key) {
  try {
    return query_evidence(ledger, who, key);
  } catch (const Error& e) {
    if (e.code() == Errc::not_found) return std::nullopt;
    throw;
  }
}

}  // namespace

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::authentic: return "Authentic";
    case Verdict::tampered: return "Tampered";
    case Verdict::missing_evidence: return "MissingEvidence";
    case Verdict::record_compromised: return "RecordCompromised";
    case Verdict::failed: return "Failed";
  }
  return "Unknown";
}

std::string TamperReport::summary() const {
  std::string s = table_id + "/" + batch_id + ": " + std::string(to_string(verdict));
  if (!changed_columns.empty()) {
    s += "; changed columns:";
    for (const auto& c : changed_columns) s += " " + c;
  }
  if (!changed_rows.empty()) {
    s += "; changed rows:";
    for (auto r : changed_rows) s += " " + std::to_string(r);
  }
  if (!changed_cells.empty()) s += "; changed cells: " + std::to_string(changed_cells.size());
  if (row_count_delta != 0) s += "; row count delta " + std::to_string(row_count_delta);
  if (!notes.empty()) s += "; " + notes;
  return s;
}

void to_json(json& j, const TamperReport& r) {
  json cells = json::array();
  for (const auto& c : r.changed_cells) {
    cells.push_back({{"row", c.row}, {"column", c.column}, {"old", c.reference_value}, {"new", c.current_value}});
  }
  j = json{{"table_id", r.table_id},
           {"batch_id", r.batch_id},
           {"evidence_key", r.evidence_key},
           {"verdict", to_string(r.verdict)},
           {"changed_columns", r.changed_columns},
           {"changed_rows", r.changed_rows},
           {"changed_cells", std::move(cells)},
           {"row_count_delta", r.row_count_delta},
           {"deep", r.deep},
           {"notes", r.notes}};
}

std::string_view StageTimings::name(Stage s) noexcept {
  switch (s) {
    case retrieve_identification: return "retrieve_identifications";
    case create_attributes: return "create_attributes";
    case encrypt: return "encrypt";
    case send_to_store: return "send_to_store";
    case send_to_ledger: return "send_to_ledger";
    case verify1: return "verify1";
    case verify2: return "verify2";
    case upload: return "upload";
    case kStageCount: break;
  }
  return "unknown";
}

template <class F>
auto Divt::timed(StageTimings::Stage stage, F&& f) {
  auto start = std::chrono::steady_clock::now();
  struct Recorder {
    StageTimings* timings;
    StageTimings::Stage stage;
    std::chrono::steady_clock::time_point start;
    ~Recorder() {
      if (timings != nullptr) timings->add(stage, std::chrono::steady_clock::now() - start);
    }
  } recorder{timings_, stage, start};
  return f();
}

UploadResult Divt::upload(const BatchSubset& batch, Traceability level, const Identity& who) {
  return timed(StageTimings::upload, [&] {
    IdentificationAttribute id =
        timed(StageTimings::retrieve_identification, [&] { return id_att_gen(batch, who.org); });
    const std::string key = evidence_key(id.organization, id.table_id, id.batch_id);
    if (find_evidence(ledger_, who, key)) {
      throw Error(Errc::duplicate, "the batch already exists: " + batch.table_id + "/" + batch.batch_id);
    }

    auto stage_error = [](std::string_view stage, const Error& e) {
      return Error(e.code(), "upload failed at stage '" + std::string(stage) + "': " + e.what());
    };

    std::string record_bytes;
    Digest h_v;
    try {
      record_bytes = timed(StageTimings::create_attributes, [&] {
        VerificationAttribute v = vrfc_att_gen(batch, level);
        h_v = v.h_v;
        return canonical_bytes(rec_gen(id, std::move(v)));
      });
    } catch (const Error& e) {
      throw stage_error("attributes", e);
    }

    KeyMaterial keys;
    CipherEnvelope envelope;
    try {
      timed(StageTimings::encrypt, [&] {
        keys = keygen();
        envelope = encrypt(record_bytes, keys);
      });
    } catch (const Error& e) {
      throw stage_error("encrypt", e);
    }

    LocationHash h_l;
    try {
      h_l = timed(StageTimings::send_to_store, [&] { return store_.put(envelope.bytes); });
    } catch (const Error& e) {
      throw stage_error("store", e);
    }

    Evidence evidence{id.organization, id.table_id, id.batch_id, h_v, h_l, level};
    Receipt receipt =
        timed(StageTimings::send_to_ledger, [&] { return create_evidence(ledger_, who, evidence, &keys); });
    if (!receipt.ok()) {
      throw stage_error("ledger", Error(receipt.error.value_or(Errc::rejected), receipt.message));
    }
    return UploadResult{key, h_v, h_l, receipt.height.value_or(0)};
  });
}

Verify1Result Divt::verify1(const BatchSubset& batch, const Identity& who) {
  return timed(StageTimings::verify1, [&] {
    ++counters_.verify1_runs;
    Verify1Result result;
    result.evidence_key = evidence_key(who.org, batch.table_id, batch.batch_id);
    result.h_v = subset_hash(batch);
    if (auto evidence = find_evidence(ledger_, who, result.evidence_key)) {
      result.evidence_found = true;
      result.h_v_chain = evidence->verification_hash;
      result.match = evidence->verification_hash == result.h_v;
    }
    return result;
  });
}

Divt::Anchored Divt::fetch_anchored(const std::string& key, const Evidence& evidence, const Identity& who) {
  KeyMaterial keys = query_private_key(ledger_, who, kPrivateCollection, key);
  Bytes envelope;
  try {
    envelope = store_.get(evidence.location_hash);
  } catch (const Error& e) {
    throw CompromisedRecord{"off-chain record unavailable: " + std::string(e.what())};
  }
  Bytes plain;
  try {
    ++counters_.decryptions;
    plain = decrypt(CipherEnvelope{std::move(envelope)}, keys);
  } catch (const Error& e) {
    throw CompromisedRecord{"off-chain record is compromised: " + std::string(e.what())};
  }
  VerificationRecord record;
  try {
    record = parse_record(std::string_view(reinterpret_cast<const char*>(plain.data()), plain.size()));
  } catch (const Error& e) {
    throw CompromisedRecord{"off-chain record is unreadable: " + std::string(e.what())};
  }
  if (record.v.h_v != evidence.verification_hash || record.v.traceability != evidence.traceability ||
      record.id.organization != evidence.organisation || record.id.table_id != evidence.table_name ||
      record.id.batch_id != evidence.batch_id) {
    throw CompromisedRecord{"off-chain record does not match the anchored evidence"};
  }
  return Anchored{evidence, std::move(record), keys};
}

TamperReport Divt::verify2(const BatchSubset& batch, const Identity& who) {
  return timed(StageTimings::verify2, [&] {
    ++counters_.verify2_runs;
    const std::string key = evidence_key(who.org, batch.table_id, batch.batch_id);
    TamperReport report = blank_report(batch, key);
    report.deep = true;
    auto evidence = find_evidence(ledger_, who, key);
    if (!evidence) {
      report.verdict = Verdict::missing_evidence;
      report.notes = "no evidence anchored for this batch";
      return report;
    }
    Anchored anchored;
    try {
      anchored = fetch_anchored(key, *evidence, who);
    } catch (const CompromisedRecord& c) {
      report.verdict = Verdict::record_compromised;
      report.notes = c.reason;
      return report;
    }

    const VerificationAttribute& reference = anchored.record.v;
    std::vector<std::string> live_cols = batch.column_names();
    if (live_cols != reference.cols) {
      report.verdict = Verdict::tampered;
      std::set<std::string> a(live_cols.begin(), live_cols.end()), b(reference.cols.begin(), reference.cols.end());
      for (const auto& c : reference.cols) {
        if (a.count(c) == 0) report.changed_columns.push_back(c);
      }
      for (const auto& c : live_cols) {
        if (b.count(c) == 0) report.changed_columns.push_back(c);
      }
      report.row_count_delta = static_cast<std::int64_t>(batch.row_count()) - static_cast<std::int64_t>(reference.rows);
      report.notes = "column set differs from the anchored record";
    } else {
      VerificationAttribute current =
          vrfc_att_gen(with_gdpr_flags(batch, reference.gdpr), reference.traceability);
      AttributeDiff diff = diff_attributes(current, reference);
      report.changed_columns = std::move(diff.changed_columns);
      report.changed_rows = std::move(diff.changed_rows);
      report.changed_cells = std::move(diff.changed_cells);
      report.row_count_delta = diff.row_count_delta;
      report.verdict = diff.empty() ? Verdict::authentic : Verdict::tampered;
      if (!diff.empty() && report.changed_columns.empty() && report.changed_rows.empty()) {
        report.notes = "subset hash differs but no attribute localizes the change";
      }
    }
    CertificateResult result =
        report.verdict == Verdict::authentic ? CertificateResult::authentic : CertificateResult::tampered;
    create_certificate(ledger_, who, key, result, report.summary()).expect_ok();
    return report;
  });
}

std::vector<TamperReport> Divt::audit(const BatchRegistry& warehouse, std::string_view table_id,
                                      std::span<const std::string> batch_ids, const Identity& who) {
  std::vector<TamperReport> reports;
  reports.reserve(batch_ids.size());
  for (const auto& id : batch_ids) {
    TamperReport report;
    report.table_id = std::string(table_id);
    report.batch_id = id;
    try {
      report.evidence_key = evidence_key(who.org, table_id, id);
      if (!warehouse.contains(table_id, id)) {
        if (find_evidence(ledger_, who, report.evidence_key)) {
          report.verdict = Verdict::tampered;
          report.notes = "batch is missing from the warehouse";
          create_certificate(ledger_, who, report.evidence_key, CertificateResult::tampered, report.summary())
              .expect_ok();
        } else {
          report.verdict = Verdict::missing_evidence;
          report.notes = "batch unknown to warehouse and ledger";
        }
        reports.push_back(std::move(report));
        continue;
      }
      const BatchSubset& batch = warehouse.get(table_id, id);
      Verify1Result quick = verify1(batch, who);
      if (!quick.evidence_found) {
        report.verdict = Verdict::missing_evidence;
        report.notes = "no evidence anchored for this batch";
      } else if (quick.match) {
        report.verdict = Verdict::authentic;
        create_certificate(ledger_, who, report.evidence_key, CertificateResult::authentic,
                           report.summary() + "; subset hash matches")
            .expect_ok();
      } else {
        report = verify2(batch, who);
      }
    } catch (const Error& e) {
      report.verdict = Verdict::failed;
      report.notes = std::string(to_string(e.code())) + ": " + e.what();
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

Receipt Divt::gdpr_delete(const BatchSubset& mutated, std::string_view reason, const Identity& who) {
  const std::string key = evidence_key(who.org, mutated.table_id, mutated.batch_id);
  Evidence evidence = query_evidence(ledger_, who, key);
  Anchored anchored;
  try {
    anchored = fetch_anchored(key, evidence, who);
  } catch (const CompromisedRecord& c) {
    throw Error(Errc::corruption, c.reason);
  }
  const VerificationRecord& old_record = anchored.record;
  BatchSubset flagged = with_gdpr_flags(mutated, old_record.v.gdpr);
  VerificationRecord new_record =
      rec_gen(old_record.id, vrfc_att_gen(flagged, old_record.v.traceability));

  KeyMaterial keys = keygen();
  CipherEnvelope envelope = encrypt(canonical_bytes(new_record), keys);
  LocationHash h_l = store_.put(envelope.bytes);
  Receipt receipt = update_evidence(ledger_, who, key, new_record.v.h_v, h_l, &old_record, new_record, keys, reason);
  receipt.expect_ok();
  return receipt;
}

std::vector<Certificate> Divt::external_audit(std::string_view key, const Identity& who) const {
  return query_certificates(ledger_, who, key);
}

}  // namespace auditem
