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
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "auditem/attributes.hpp"
#include "auditem/warehouse.hpp"

namespace auditem::bench {

/// Synthetic warehouse extract: 28 text columns per row, two of them long
/// WKT-like strings standing in for geometries. Records are split as evenly
/// as possible over `batches` batches.
inline constexpr std::size_t kSyntheticColumns = 28;
std::vector<BatchSubset> synthetic_batches(std::string table_id, std::size_t records, std::size_t batches,
                                           std::uint64_t seed);

/// Paired lists: run i uses records_per_run[i] records over batches_per_run[i] batches.
struct OverheadConfig {
  std::vector<std::size_t> records_per_run;
  std::vector<std::size_t> batches_per_run;
  std::size_t repetitions = 3;
  /// Discarded runs before the measured ones, per configuration.
  std::size_t warmup_repetitions = 1;
  Traceability level = Traceability::columns;
  /// Per-configuration wall-clock budget in seconds; 0 disables. A run whose
  /// predicted time exceeds it is skipped and reported with a marker row.
  double budget_s = 0;
  std::uint64_t seed = 42;
};

struct StageStat {
  std::string config;
  std::size_t records = 0;
  std::size_t batches = 0;
  std::string stage;
  double mean_s = 0;
  double sd_s = 0;
  double median_s = 0;
  std::size_t samples = 0;
  bool skipped = false;
};

struct OverheadReport {
  std::vector<StageStat> rows;

  const StageStat* find(std::size_t records, std::size_t batches, std::string_view stage) const;
  /// Columns: config,stage,mean_s,sd_s
  std::string to_csv() const;
};

/// Times upload, verify1, verify2 (forced) and the individual protocol
/// stages, each on a fresh in-memory ledger and store.
OverheadReport run_overhead(const OverheadConfig& config);

/// Reads "key = value" lines: records, batches (comma lists), repetitions, warmup,
/// level, budget_s, seed.
OverheadConfig parse_overhead_config(std::string_view text);

enum class LoadOp { write, read };

struct LoadConfig {
  std::vector<double> send_rates;
  std::size_t workers = 10;
  std::size_t tx_count = 100;
  LoadOp op = LoadOp::write;
  std::chrono::microseconds commit_delay{0};
  /// When positive, a rate r submits min(tx_count, max(2, ceil(r * cap)))
  /// transactions.
  double duration_cap_s = 0;
};

struct LoadRow {
  double rate = 0;
  std::size_t submitted = 0;
  std::size_t committed = 0;
  double send_rate = 0;
  double throughput = 0;
  double lat_min = 0;
  double lat_avg = 0;
  double lat_max = 0;
  double success_ratio = 0;
  std::uint64_t height_before = 0;
  std::uint64_t height_after = 0;
};

struct LoadReport {
  std::vector<LoadRow> rows;
  /// Columns: rate,throughput,lat_min,lat_avg,lat_max,success_ratio
  std::string to_csv() const;
};

/// Open-loop arrivals at each target rate, spread round-robin over the
/// workers; every rate runs on a fresh ledger.
LoadReport run_load(const LoadConfig& config);

std::size_t transactions_for_rate(const LoadConfig& config, double rate);

}  // namespace auditem::bench
