// Copyright 2026 The MPE-PSN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpepsn/rng.hpp"

#include <cmath>
#include <numbers>

namespace mpepsn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::split(std::uint64_t id) const noexcept {
  // Child streams live in a different key space: the stream word is rehashed
  // with the id so (stream, id) pairs never alias plain stream numbers.
  return Rng(seed_, splitmix64(stream_ ^ splitmix64(id + 0x632BE59BD9B4E019ull)));
}

double Rng::normal(std::uint64_t index) const noexcept {
  auto out = philox4x32(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
       static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
  std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
  // u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngCursor::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift; the bias is < n / 2^64 and irrelevant here.
  unsigned __int128 p = static_cast<unsigned __int128>(rng_.bits(next_++)) * n;
  return static_cast<std::uint64_t>(p >> 64);
}

}  // namespace mpepsn
