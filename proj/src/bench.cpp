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

#include "mpepsn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <new>
#include <set>
#include <sstream>

#include "mpepsn/tensor_io.hpp"

namespace mpepsn {

std::int64_t median(std::vector<std::int64_t> samples) {
  if (samples.empty()) throw ValueError("median of no samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  if (samples.size() % 2 == 1) return samples[mid];
  return samples[mid - 1] + (samples[mid] - samples[mid - 1]) / 2;
}

Tensor bench_input(std::size_t T, std::size_t B, std::size_t N, std::uint64_t seed) {
  Tensor x({T, B, N});
  const Rng rng(seed, 0xBE4C);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -2.0 + 4.0 * rng.uniform(i);
  return x;
}

Timings time_forward(ForwardKind kind, std::size_t T, std::size_t B, std::size_t N,
                     std::size_t workers, std::size_t reps, std::uint64_t seed,
                     const NeuronParams& params) {
  if (T == 0 || B == 0 || N == 0 || workers == 0) throw ValueError("grid values must be >= 1");
  if (reps < 5) throw ValueError("at least 5 timed repetitions are required");
  params.validate();
  const Tensor input = bench_input(T, B, N, seed);
  std::vector<double> u(input.size()), o(input.size());
  WorkerPool pool(kind == ForwardKind::parallel ? workers : 1);
  const Rng sample_rng(seed, 0x5A3F);

  auto once = [&] {
    if (kind == ForwardKind::sequential) {
      lif_sequential_kernel(input.data(), T, params, u, o);
    } else {
      mpe_psn_sampled_kernel(input.data(), T, params, sample_rng, pool, u, o);
    }
  };

  Timings out;
  once();  // warmup, not recorded
  out.ns.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    once();
    const auto t1 = std::chrono::steady_clock::now();
    out.ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  out.median_ns = median(out.ns);
  return out;
}

BenchRecord bench_point(std::size_t T, std::size_t B, std::size_t N, std::size_t workers,
                        std::size_t reps, std::uint64_t seed) {
  Timings seq = time_forward(ForwardKind::sequential, T, B, N, workers, reps, seed);
  Timings par = time_forward(ForwardKind::parallel, T, B, N, workers, reps, seed);
  BenchRecord rec{T, N, B, workers, reps, seq.median_ns, par.median_ns, 0.0};
  rec.ratio = static_cast<double>(std::max<std::int64_t>(seq.median_ns, 1)) /
              static_cast<double>(std::max<std::int64_t>(par.median_ns, 1));
  return rec;
}

SweepResult sweep(const std::vector<std::size_t>& t_grid, const std::vector<std::size_t>& n_grid,
                  std::size_t B, std::size_t workers, std::size_t reps, std::uint64_t seed) {
  if (t_grid.empty() || n_grid.empty()) throw ValueError("sweep grids must be non-empty");
  SweepResult result;
  for (std::size_t T : t_grid)
    for (std::size_t N : n_grid) {
      try {
        result.records.push_back(bench_point(T, B, N, workers, reps, seed));
      } catch (const std::bad_alloc&) {
        result.skipped.push_back("T=" + std::to_string(T) + ",N=" + std::to_string(N));
      } catch (const std::length_error&) {
        result.skipped.push_back("T=" + std::to_string(T) + ",N=" + std::to_string(N));
      }
    }
  return result;
}

std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out << kBenchHeader << '\n';
  for (const auto& r : records) {
    out << r.T << ',' << r.N << ',' << r.B << ',' << r.workers << ',' << r.reps << ','
        << r.seq_median_ns << ',' << r.par_median_ns << ',' << format_real(r.ratio) << '\n';
  }
  return out.str();
}

std::vector<BenchRecord> parse_bench_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kBenchHeader) {
    throw ParseError(1, "expected benchmark header '" + std::string(kBenchHeader) + "'");
  }
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 8) throw ParseError(lineno, "expected 8 columns");
    auto whole = [&](std::string_view s) {
      const double v = parse_real(s, lineno);
      if (v != std::floor(v) || v < 0) throw ParseError(lineno, "expected a whole number");
      return v;
    };
    BenchRecord r;
    r.T = static_cast<std::size_t>(whole(f[0]));
    r.N = static_cast<std::size_t>(whole(f[1]));
    r.B = static_cast<std::size_t>(whole(f[2]));
    r.workers = static_cast<std::size_t>(whole(f[3]));
    r.reps = static_cast<std::size_t>(whole(f[4]));
    r.seq_median_ns = static_cast<std::int64_t>(whole(f[5]));
    r.par_median_ns = static_cast<std::int64_t>(whole(f[6]));
    r.ratio = parse_real(f[7], lineno);
    out.push_back(r);
  }
  return out;
}

std::string ratio_matrix(const std::vector<BenchRecord>& records) {
  std::set<std::size_t> ts, ns;
  std::map<std::pair<std::size_t, std::size_t>, double> ratio;
  for (const auto& r : records) {
    ts.insert(r.T);
    ns.insert(r.N);
    ratio[{r.T, r.N}] = r.ratio;
  }
  std::ostringstream out;
  out << "# rows: T =";
  for (auto t : ts) out << ' ' << t;
  out << "\n# cols: N =";
  for (auto n : ns) out << ' ' << n;
  out << '\n';
  for (auto t : ts) {
    bool first = true;
    for (auto n : ns) {
      out << (first ? "" : " ");
      first = false;
      auto it = ratio.find({t, n});
      out << (it == ratio.end() ? std::string("NaN") : format_real(it->second));
    }
    out << '\n';
  }
  return out.str();
}

TrendSummary summarize_trend(const std::vector<BenchRecord>& records,
                             std::size_t allowed_inversions) {
  TrendSummary s;
  if (records.empty()) return s;
  for (const auto& r : records) s.T = std::max(s.T, r.T);
  std::vector<const BenchRecord*> row;
  for (const auto& r : records)
    if (r.T == s.T) row.push_back(&r);
  std::sort(row.begin(), row.end(), [](auto* a, auto* b) { return a->N < b->N; });
  for (auto* r : row) {
    s.N.push_back(r->N);
    s.ratio.push_back(r->ratio);
  }
  for (std::size_t i = 1; i < s.ratio.size(); ++i)
    if (s.ratio[i] < s.ratio[i - 1]) ++s.inversions;
  s.monotone = s.inversions <= allowed_inversions;
  s.ratio_at_largest = s.ratio.empty() ? 0.0 : s.ratio.back();
  return s;
}

std::string TrendSummary::describe() const {
  std::ostringstream out;
  out << "trend at T=" << T << ":";
  for (std::size_t i = 0; i < N.size(); ++i) out << " N=" << N[i] << " ratio=" << format_real(ratio[i]) << ';';
  out << " inversions=" << inversions << " monotone=" << (monotone ? "yes" : "no")
      << " ratio_at_largest=" << format_real(ratio_at_largest);
  return out.str();
}

}  // namespace mpepsn
