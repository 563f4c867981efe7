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

#include "auditem/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "auditem/cas.hpp"
#include "auditem/divt.hpp"
#include "auditem/error.hpp"
#include "auditem/ledger.hpp"

namespace auditem::bench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::array<std::string_view, kSyntheticColumns> kColumns = {
    "objectid", "postcode",  "street",   "housenumber", "city",       "province", "municipality",
    "buildyear", "surface",  "usage",    "status",      "owner",      "valuation", "energylabel",
    "roof",     "floors",    "units",    "parcel",      "cadastral",  "lat",       "lon",
    "zone",     "permit",    "inspection", "updated",   "source",     "footprint", "outline"};

constexpr std::array<std::string_view, 8> kWords = {"Amsterdam", "Utrecht", "Delft",   "Zwolle",
                                                    "Leiden",    "Arnhem",  "Haarlem", "Breda"};

std::string geometry(std::mt19937_64& rng, std::size_t points) {
  std::uniform_real_distribution<double> coord(0.0, 300000.0);
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << "POLYGON((";
  for (std::size_t i = 0; i < points; ++i) {
    if (i > 0) out << ',';
    out << coord(rng) << ' ' << coord(rng);
  }
  out << "))";
  return out.str();
}

struct Samples {
  std::vector<double> values;

  void add(double v) { values.push_back(v); }
  double mean() const {
    return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  }
  double sd() const {
    if (values.size() < 2) return 0.0;
    double m = mean();
    double ss = 0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  double median() const {
    if (values.empty()) return 0.0;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
};

AccessPolicy bench_policy(Identity& client) {
  client = Identity{"BenchOrg", "client", "bench-secret"};
  AccessPolicy policy;
  policy.add_member(client, {std::string(roles::uploader), std::string(roles::auditor), std::string(roles::gdpr)});
  return policy;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string config_label(std::size_t records, std::size_t batches) {
  return "records=" + std::to_string(records) + " batches=" + std::to_string(batches);
}

Digest random_digest(std::mt19937_64& rng) {
  std::array<std::uint8_t, 32> raw{};
  for (auto& b : raw) b = static_cast<std::uint8_t>(rng());
  return Digest(raw);
}

void atomic_min(std::atomic<std::int64_t>& target, std::int64_t v) {
  std::int64_t cur = target.load();
  while (v < cur && !target.compare_exchange_weak(cur, v)) {
  }
}

void atomic_max(std::atomic<std::int64_t>& target, std::int64_t v) {
  std::int64_t cur = target.load();
  while (v > cur && !target.compare_exchange_weak(cur, v)) {
  }
}

// Shared by all load workers.
struct LoadMetrics {
  std::atomic<std::size_t> submitted{0};
  std::atomic<std::size_t> committed{0};
  std::atomic<std::int64_t> latency_sum_ns{0};
  std::atomic<std::int64_t> latency_min_ns{std::numeric_limits<std::int64_t>::max()};
  std::atomic<std::int64_t> latency_max_ns{0};
  std::atomic<std::int64_t> last_submit_ns{0};
  std::atomic<std::int64_t> last_commit_ns{0};
};

std::vector<std::size_t> parse_size_list(const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c) || c == '_'; }),
               item.end());
    if (item.empty()) continue;
    bool digits = std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); });
    try {
      if (!digits) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(std::stoull(item)));
    } catch (const std::exception&) {
      throw Error(Errc::config, "not a non-negative integer: '" + item + "'");
    }
  }
  return out;
}

std::size_t parse_count(const std::string& value) {
  auto list = parse_size_list(value);
  if (list.size() != 1) throw Error(Errc::config, "expected one non-negative integer, got '" + value + "'");
  return list[0];
}

}  // namespace

std::vector<BatchSubset> synthetic_batches(std::string table_id, std::size_t records, std::size_t batches,
                                           std::uint64_t seed) {
  if (batches == 0 || records < batches) {
    throw Error(Errc::validation, "need at least one record per batch");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> small(0, 999);
  std::vector<ColumnSpec> schema;
  for (auto name : kColumns) schema.push_back({std::string(name), name == "owner"});

  std::vector<BatchSubset> out;
  out.reserve(batches);
  std::size_t next_id = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    BatchSubset batch;
    batch.table_id = table_id;
    batch.batch_id = std::to_string(b + 1);
    batch.timestamp = "2021-06-01T00:00:00Z";
    batch.schema = schema;
    std::size_t n = records / batches + (b < records % batches ? 1 : 0);
    batch.rows.reserve(n);
    for (std::size_t r = 0; r < n; ++r, ++next_id) {
      Row row;
      row.reserve(kSyntheticColumns);
      for (std::size_t c = 0; c < kSyntheticColumns; ++c) {
        if (c == 0) {
          row.push_back(std::to_string(next_id));
        } else if (c + 2 >= kSyntheticColumns) {
          row.push_back(geometry(rng, 8));
        } else if (c % 3 == 0) {
          row.push_back(std::string(kWords[small(rng) % kWords.size()]));
        } else {
          row.push_back(std::to_string(small(rng)) + "." + std::to_string(small(rng)));
        }
      }
      batch.rows.push_back(std::move(row));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

const StageStat* OverheadReport::find(std::size_t records, std::size_t batches, std::string_view stage) const {
  for (const auto& row : rows) {
    if (row.records == records && row.batches == batches && row.stage == stage) return &row;
  }
  return nullptr;
}

std::string OverheadReport::to_csv() const {
  std::ostringstream out;
  out << "config,stage,mean_s,sd_s\n";
  out << std::setprecision(6);
  for (const auto& row : rows) {
    out << row.config << ',' << (row.skipped ? "skipped" : row.stage) << ',' << row.mean_s << ',' << row.sd_s << '\n';
  }
  return out.str();
}

OverheadReport run_overhead(const OverheadConfig& config) {
  if (config.records_per_run.size() != config.batches_per_run.size()) {
    throw Error(Errc::config, "records and batches lists must have equal length");
  }
  OverheadReport report;
  if (config.repetitions == 0) return report;

  double seconds_per_record = 0;  // from the last completed configuration
  for (std::size_t i = 0; i < config.records_per_run.size(); ++i) {
    const std::size_t records = config.records_per_run[i];
    const std::size_t batches = config.batches_per_run[i];
    const std::string label = config_label(records, batches);
    if (records == 0 || batches == 0) throw Error(Errc::config, "records and batches must be positive");

    if (config.budget_s > 0 && seconds_per_record > 0 &&
        seconds_per_record * static_cast<double>(records) *
                static_cast<double>(config.warmup_repetitions + config.repetitions) >
            config.budget_s) {
      StageStat skipped;
      skipped.config = label;
      skipped.records = records;
      skipped.batches = batches;
      skipped.stage = "skipped";
      skipped.skipped = true;
      report.rows.push_back(skipped);
      continue;
    }

    std::map<std::string, Samples> samples;
    const std::size_t runs = config.warmup_repetitions + config.repetitions;
    auto config_start = Clock::now();
    for (std::size_t rep = 0; rep < runs; ++rep) {
      const bool measured = rep >= config.warmup_repetitions;
      std::vector<BatchSubset> data = synthetic_batches("Bench", records, batches, config.seed + rep);
      Identity client;
      Ledger ledger(bench_policy(client));
      MemoryStore store;
      Divt divt(ledger, store);
      StageTimings timings;
      divt.set_timings(&timings);
      auto record = [&](std::string_view name, double secs) {
        if (measured) samples[std::string(name)].add(secs);
      };

      auto start = Clock::now();
      for (const auto& batch : data) divt.upload(batch, config.level, client);
      record("upload", seconds_since(start));

      start = Clock::now();
      for (const auto& batch : data) divt.verify1(batch, client);
      record("verify1", seconds_since(start));

      start = Clock::now();
      for (const auto& batch : data) divt.verify2(batch, client);
      record("verify2", seconds_since(start));

      for (auto stage : {StageTimings::retrieve_identification, StageTimings::create_attributes,
                         StageTimings::encrypt, StageTimings::send_to_store, StageTimings::send_to_ledger}) {
        record(StageTimings::name(stage), timings.seconds(stage));
      }
    }
    seconds_per_record = seconds_since(config_start) / static_cast<double>(runs * records);

    std::vector<std::string> order = {"upload", "verify1", "verify2"};
    for (std::size_t st = 0; st < StageTimings::verify1; ++st) {
      order.emplace_back(StageTimings::name(static_cast<StageTimings::Stage>(st)));
    }
    for (const auto& stage : order) {
      const Samples& s = samples[stage];
      report.rows.push_back(StageStat{label, records, batches, stage, s.mean(), s.sd(), s.median(),
                                      s.values.size(), false});
    }
  }
  return report;
}

OverheadConfig parse_overhead_config(std::string_view text) {
  OverheadConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "records") {
        config.records_per_run = parse_size_list(value);
      } else if (key == "batches") {
        config.batches_per_run = parse_size_list(value);
      } else if (key == "repetitions") {
        config.repetitions = parse_count(value);
      } else if (key == "warmup") {
        config.warmup_repetitions = parse_count(value);
      } else if (key == "level") {
        config.level = traceability_from_int(std::stoi(value));
      } else if (key == "budget_s") {
        config.budget_s = std::stod(value);
      } else if (key == "seed") {
        config.seed = std::stoull(value);
      } else {
        throw Error(Errc::config, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(Errc::config, "line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  if (config.records_per_run.size() != config.batches_per_run.size()) {
    throw Error(Errc::config, "records and batches lists must have equal length");
  }
  return config;
}

std::string LoadReport::to_csv() const {
  std::ostringstream out;
  out << "rate,throughput,lat_min,lat_avg,lat_max,success_ratio\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.rate << ',' << r.throughput << ',' << r.lat_min << ',' << r.lat_avg << ',' << r.lat_max << ','
        << r.success_ratio << '\n';
  }
  return out.str();
}

std::size_t transactions_for_rate(const LoadConfig& config, double rate) {
  if (config.duration_cap_s <= 0) return config.tx_count;
  auto capped = static_cast<std::size_t>(std::ceil(rate * config.duration_cap_s));
  return std::min(config.tx_count, std::max<std::size_t>(2, capped));
}

LoadReport run_load(const LoadConfig& config) {
  if (config.workers == 0) throw Error(Errc::config, "need at least one worker");
  LoadReport report;
  for (double rate : config.send_rates) {
    if (!(rate > 0)) throw Error(Errc::config, "send rates must be positive");
    const std::size_t n = transactions_for_rate(config, rate);

    Identity client;
    LedgerOptions options;
    options.commit_delay = config.commit_delay;
    Ledger ledger(bench_policy(client), options);
    std::mt19937_64 rng(static_cast<std::uint64_t>(rate * 1000));

    std::vector<std::string> read_keys;
    if (config.op == LoadOp::read) {
      const std::size_t preload = std::min<std::size_t>(n, 32);
      for (std::size_t i = 0; i < preload; ++i) {
        Evidence e{client.org, "LoadTable", "seed-" + std::to_string(i), random_digest(rng), random_digest(rng),
                   Traceability::columns};
        create_evidence(ledger, client, e).expect_ok();
        read_keys.push_back(e.key());
      }
    }
    std::vector<Evidence> writes;
    if (config.op == LoadOp::write) {
      writes.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        writes.push_back(Evidence{client.org, "LoadTable", "tx-" + std::to_string(i), random_digest(rng),
                                  random_digest(rng), Traceability::columns});
      }
    }

    LoadRow row;
    row.rate = rate;
    row.height_before = ledger.height();
    LoadMetrics metrics;
    const auto t0 = Clock::now() + std::chrono::milliseconds(20);
    auto since_t0 = [&](Clock::time_point t) {
      return std::chrono::duration_cast<std::chrono::nanoseconds>(t - t0).count();
    };

    auto worker = [&](std::size_t w) {
      for (std::size_t i = w; i < n; i += config.workers) {
        auto slot = t0 + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(static_cast<double>(i) / rate));
        std::this_thread::sleep_until(slot);
        auto sent = Clock::now();
        ++metrics.submitted;
        atomic_max(metrics.last_submit_ns, since_t0(sent));
        bool ok = false;
        if (config.op == LoadOp::write) {
          ok = create_evidence(ledger, client, writes[i]).ok();
        } else {
          try {
            query_evidence(ledger, client, read_keys[i % read_keys.size()]);
            ok = true;
          } catch (const Error&) {
            ok = false;
          }
        }
        auto done = Clock::now();
        if (!ok) continue;
        ++metrics.committed;
        std::int64_t lat = std::chrono::duration_cast<std::chrono::nanoseconds>(done - sent).count();
        metrics.latency_sum_ns += lat;
        atomic_min(metrics.latency_min_ns, lat);
        atomic_max(metrics.latency_max_ns, lat);
        atomic_max(metrics.last_commit_ns, since_t0(done));
      }
    };

    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < std::min(config.workers, n); ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();

    row.height_after = ledger.height();
    row.submitted = metrics.submitted;
    row.committed = metrics.committed;
    const double slot = 1.0 / rate;
    row.send_rate = static_cast<double>(row.submitted) / (metrics.last_submit_ns.load() * 1e-9 + slot);
    row.throughput = static_cast<double>(row.committed) / (metrics.last_commit_ns.load() * 1e-9 + slot);
    if (row.committed > 0) {
      row.lat_min = metrics.latency_min_ns.load() * 1e-9;
      row.lat_max = metrics.latency_max_ns.load() * 1e-9;
      row.lat_avg = metrics.latency_sum_ns.load() * 1e-9 / static_cast<double>(row.committed);
    }
    row.success_ratio = row.submitted == 0 ? 0.0 : static_cast<double>(row.committed) / row.submitted;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace auditem::bench
