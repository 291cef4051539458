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

#ifndef TROPTRAJ_RNG_HPP
#define TROPTRAJ_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace troptraj {

/// Independent generator derived from the run seed and a stream name
/// ("probes", "annulus", "curvature", ...).
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

} // namespace troptraj

#endif // TROPTRAJ_RNG_HPP
