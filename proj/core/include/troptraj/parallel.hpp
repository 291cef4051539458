/*
 * Copyright 2026 The troptraj Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TROPTRAJ_PARALLEL_HPP
#define TROPTRAJ_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace troptraj {

/// Process-wide worker count for coarse-grained loops. Defaults to the
/// TROPTRAJ_THREADS environment variable, else 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Number of chunks parallel_for splits `count` items into.
inline std::size_t parallel_workers(std::size_t count) {
  return std::max<std::size_t>(1, std::min(thread_count(), count));
}

/// Runs body(begin, end, worker) over contiguous chunks of [0, count).
/// Chunk boundaries depend only on count and the worker count, so
/// per-index results written to preallocated slots are deterministic.
template <typename Body>
void parallel_for(std::size_t count, Body &&body) {
  const std::size_t workers = parallel_workers(count);
  if (workers <= 1) {
    if (count > 0)
      body(std::size_t{0}, count, std::size_t{0});
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end)
      break;
    pool.emplace_back([&body, begin, end, w] { body(begin, end, w); });
  }
}

} // namespace troptraj

#endif // TROPTRAJ_PARALLEL_HPP
