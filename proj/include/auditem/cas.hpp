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

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>

#include "auditem/digest.hpp"

namespace auditem {

/// Address of an object in a ContentStore: SHA-256 of its bytes.
using LocationHash = Digest;

struct ObjectStat {
  bool exists = false;
  std::size_t size = 0;

  friend bool operator==(const ObjectStat&, const ObjectStat&) = default;
};

/// Content-addressed blob store. Identical content maps to one object;
/// every get re-verifies the digest before returning bytes.
class ContentStore {
 public:
  virtual ~ContentStore() = default;

  /// Throws Errc::validation for empty content, Errc::storage on write failure.
  virtual LocationHash put(std::span<const std::uint8_t> content) = 0;
  /// Throws Errc::not_found, or Errc::corruption when stored bytes no longer
  /// hash to `address`.
  virtual Bytes get(const LocationHash& address) const = 0;
  virtual ObjectStat stat(const LocationHash& address) const = 0;
  virtual std::size_t object_count() const = 0;
};

class MemoryStore final : public ContentStore {
 public:
  LocationHash put(std::span<const std::uint8_t> content) override;
  Bytes get(const LocationHash& address) const override;
  ObjectStat stat(const LocationHash& address) const override;
  std::size_t object_count() const override;

 private:
  mutable std::shared_mutex mutex_;
  std::map<LocationHash, Bytes> objects_;
};

/// On-disk layout: <root>/objects/<first 2 hex>/<remaining 62 hex>.
/// Writes go through a temporary file and an atomic rename, so racing
/// writers of the same content converge on one object.
class DiskStore final : public ContentStore {
 public:
  explicit DiskStore(std::filesystem::path root);

  LocationHash put(std::span<const std::uint8_t> content) override;
  Bytes get(const LocationHash& address) const override;
  ObjectStat stat(const LocationHash& address) const override;
  std::size_t object_count() const override;

  std::filesystem::path object_path(const LocationHash& address) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace auditem
