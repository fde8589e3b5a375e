// Copyright 2026 The dsrl Authors
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

#include "dsrl/archive.hpp"

#include <cstring>
#include <fstream>

#include "dsrl/common.hpp"

namespace dsrl {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'R', 'L', 'T', 'N', 'S', 'R'};

template <typename T>
void write_le(std::ofstream& f, T v) {
  // Build tests assert on byte-identical artifacts; this codebase only
  // targets little-endian hosts.
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void TensorArchive::put(const std::string& name, std::vector<std::uint64_t> dims,
                        std::vector<double> data) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  if (n != data.size()) throw InvalidInput("tensor '" + name + "': dims do not match data size");
  entries_[name] = Entry{std::move(dims), std::move(data)};
}

void TensorArchive::put_scalar(const std::string& name, double value) {
  put(name, {1}, {value});
}

void TensorArchive::put_vector(const std::string& name, const std::vector<double>& v) {
  put(name, {v.size()}, v);
}

const TensorArchive::Entry& TensorArchive::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InvalidInput("archive has no tensor '" + name + "'");
  return it->second;
}

double TensorArchive::get_scalar(const std::string& name) const {
  const Entry& e = get(name);
  if (e.data.size() != 1) throw InvalidInput("tensor '" + name + "' is not a scalar");
  return e.data[0];
}

void TensorArchive::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  f.write(kMagic, 8);
  write_le<std::uint32_t>(f, kVersion);
  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {  // std::map iterates sorted
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) write_le<std::uint64_t>(f, d);
    f.write(reinterpret_cast<const char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!f) throw InvalidInput("short write: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) {
    throw InvalidInput("not a tensor archive: " + path);
  }
  const auto version = read_le<std::uint32_t>(f);
  if (version != kVersion) {
    throw InvalidInput("unsupported archive version in " + path);
  }
  const auto count = read_le<std::uint32_t>(f);
  TensorArchive out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const auto ndim = read_le<std::uint32_t>(f);
    std::vector<std::uint64_t> dims(ndim);
    std::uint64_t n = 1;
    for (auto& d : dims) {
      d = read_le<std::uint64_t>(f);
      n *= d;
    }
    std::vector<double> data(n);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw InvalidInput("truncated archive: " + path);
    out.entries_[name] = Entry{std::move(dims), std::move(data)};
  }
  return out;
}

}  // namespace dsrl
