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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mpepsn/neuron.hpp"

namespace mpepsn {

enum class ForwardKind { sequential, parallel };

/// Wall-clock samples for one kind at one grid point, warmup excluded.
struct Timings {
  std::vector<std::int64_t> ns;
  std::int64_t median_ns = 0;
};

/// Median of the samples; the mean of the middle two for even counts.
std::int64_t median(std::vector<std::int64_t> samples);

/// One grid point of the sequential-vs-parallel comparison.
struct BenchRecord {
  std::size_t T = 0;
  std::size_t N = 0;
  std::size_t B = 0;
  std::size_t workers = 0;
  std::size_t reps = 0;
  std::int64_t seq_median_ns = 0;
  std::int64_t par_median_ns = 0;
  double ratio = 0.0;
};

/// Input current shared by both kinds at a grid point: U(-2, 2) keyed by seed.
Tensor bench_input(std::size_t T, std::size_t B, std::size_t N, std::uint64_t seed);

/// Times `reps` forward passes after one discarded warmup pass. Sequential
/// runs the single-threaded time loop; parallel runs the sampled MPE-PSN
/// kernel on a pool of `workers`. Both read bench_input(T, B, N, seed).
Timings time_forward(ForwardKind kind, std::size_t T, std::size_t B, std::size_t N,
                     std::size_t workers, std::size_t reps, std::uint64_t seed,
                     const NeuronParams& params = {});

/// Both kinds at one point.
BenchRecord bench_point(std::size_t T, std::size_t B, std::size_t N, std::size_t workers,
                        std::size_t reps, std::uint64_t seed);

struct SweepResult {
  std::vector<BenchRecord> records;
  /// Grid points that could not be allocated, as "T=..,N=..".
  std::vector<std::string> skipped;
};

/// Every (T, N) pair of the grids, T-major.
SweepResult sweep(const std::vector<std::size_t>& t_grid, const std::vector<std::size_t>& n_grid,
                  std::size_t B, std::size_t workers, std::size_t reps, std::uint64_t seed);

inline constexpr const char* kBenchHeader =
    "T,N,B,workers,reps,seq_median_ns,par_median_ns,ratio";

std::string bench_csv(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> parse_bench_csv(const std::string& text);

/// gnuplot matrix: a comment naming the axes, then one row per T holding the
/// ratio for every N (NaN for missing points).
std::string ratio_matrix(const std::vector<BenchRecord>& records);

/// Monotone-trend check over the N grid at the largest T: ratios may decrease
/// at most `allowed_inversions` times along increasing N.
struct TrendSummary {
  std::size_t T = 0;
  std::vector<std::size_t> N;
  std::vector<double> ratio;
  std::size_t inversions = 0;
  bool monotone = false;
  /// Ratio at the largest (T, N) point.
  double ratio_at_largest = 0.0;

  std::string describe() const;
};

TrendSummary summarize_trend(const std::vector<BenchRecord>& records,
                             std::size_t allowed_inversions = 1);

}  // namespace mpepsn
