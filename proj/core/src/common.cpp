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

#include "dsrl/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace dsrl {

namespace {
int g_num_threads = 0;  // 0 = not yet initialized
}

void set_num_threads(int n) { g_num_threads = n < 1 ? 1 : n; }

int num_threads() {
  if (g_num_threads == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    g_num_threads = hc == 0 ? 1 : static_cast<int>(hc);
  }
  return g_num_threads;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = num_threads();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<std::size_t>(workers, n)) - 1;
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace dsrl
