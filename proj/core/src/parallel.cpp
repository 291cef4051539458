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

#include "troptraj/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace troptraj {
namespace {

std::size_t env_threads() {
  if (const char *env = std::getenv("TROPTRAJ_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0)
        return static_cast<std::size_t>(n);
    } catch (const std::exception &) {
    }
  }
  return 1;
}

std::atomic<std::size_t> &threads() {
  static std::atomic<std::size_t> n{env_threads()};
  return n;
}

} // namespace

std::size_t thread_count() { return threads().load(); }

void set_thread_count(std::size_t n) { threads().store(n == 0 ? 1 : n); }

} // namespace troptraj
