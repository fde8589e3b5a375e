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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dsrl {

/// Versioned container of named f64 tensors. Entries are written sorted by
/// name so the byte stream is a pure function of the contents.
///
/// Layout (little endian):
///   magic "DSRLTNSR" | u32 version | u32 count
///   per entry: u32 name_len | name bytes | u32 ndim | u64 dims[] | f64 data[]
class TensorArchive {
 public:
  struct Entry {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
  };

  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, std::vector<std::uint64_t> dims,
           std::vector<double> data);
  void put_scalar(const std::string& name, double value);
  void put_vector(const std::string& name, const std::vector<double>& v);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Entry& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace dsrl
