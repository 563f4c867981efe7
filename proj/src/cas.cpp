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

#include "auditem/cas.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "auditem/error.hpp"

namespace auditem {

namespace fs = std::filesystem;

namespace {

void require_content(std::span<const std::uint8_t> content) {
  if (content.empty()) throw Error(Errc::validation, "content store rejects empty content");
}

Bytes verified(Bytes bytes, const LocationHash& address) {
  if (sha256(bytes) != address) {
    throw Error(Errc::corruption, "stored object " + address.hex() + " fails digest verification");
  }
  return bytes;
}

bool intact(const fs::path& path, const LocationHash& address) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  Sha256 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  return h.finish() == address;
}

}  // namespace

LocationHash MemoryStore::put(std::span<const std::uint8_t> content) {
  require_content(content);
  LocationHash address = sha256(content);
  std::unique_lock lock(mutex_);
  objects_.try_emplace(address, content.begin(), content.end());
  return address;
}

Bytes MemoryStore::get(const LocationHash& address) const {
  Bytes copy;
  {
    std::shared_lock lock(mutex_);
    auto it = objects_.find(address);
    if (it == objects_.end()) throw Error(Errc::not_found, "no object at " + address.hex());
    copy = it->second;
  }
  return verified(std::move(copy), address);
}

ObjectStat MemoryStore::stat(const LocationHash& address) const {
  std::shared_lock lock(mutex_);
  auto it = objects_.find(address);
  if (it == objects_.end()) return {};
  return {true, it->second.size()};
}

std::size_t MemoryStore::object_count() const {
  std::shared_lock lock(mutex_);
  return objects_.size();
}

DiskStore::DiskStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "objects", ec);
  if (ec) throw Error(Errc::storage, "cannot create store at " + root_.string() + ": " + ec.message());
}

fs::path DiskStore::object_path(const LocationHash& address) const {
  std::string hex = address.hex();
  return root_ / "objects" / hex.substr(0, 2) / hex.substr(2);
}

LocationHash DiskStore::put(std::span<const std::uint8_t> content) {
  require_content(content);
  LocationHash address = sha256(content);
  fs::path target = object_path(address);
  std::error_code ec;
  if (fs::exists(target, ec) && intact(target, address)) return address;

  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(Errc::storage, "cannot create " + target.parent_path().string() + ": " + ec.message());

  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << ".tmp-" << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '-'
           << counter.fetch_add(1);
  fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(Errc::storage, "write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::storage, "cannot publish object " + address.hex());
  }
  return address;
}

Bytes DiskStore::get(const LocationHash& address) const {
  fs::path path = object_path(address);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "no object at " + address.hex());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return verified(std::move(bytes), address);
}

ObjectStat DiskStore::stat(const LocationHash& address) const {
  std::error_code ec;
  fs::path path = object_path(address);
  if (!fs::is_regular_file(path, ec)) return {};
  auto size = fs::file_size(path, ec);
  if (ec) return {};
  return {true, static_cast<std::size_t>(size)};
}

std::size_t DiskStore::object_count() const {
  std::size_t count = 0;
  std::error_code ec;
  for (const auto& entry : fs::recursive_directory_iterator(root_ / "objects", ec)) {
    if (entry.is_regular_file() && entry.path().filename().string().rfind(".tmp-", 0) != 0) ++count;
  }
  return count;
}

}  // namespace auditem
