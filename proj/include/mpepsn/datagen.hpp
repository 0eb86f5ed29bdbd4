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
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mpepsn/tensor.hpp"

namespace mpepsn {

enum class PatternKind {
  /// Class k drives its own block of features with a constant current.
  rate_coded,
  /// Every feature gets one pulse; the pulse time depends on class and feature.
  phase_coded,
};

/// Recipe for a synthetic temporal classification set.
struct DatasetSpec {
  std::size_t classes = 2;
  std::size_t time_steps = 8;
  std::size_t features = 16;
  std::size_t samples_per_class = 128;
  double noise_std = 0.3;
  PatternKind kind = PatternKind::rate_coded;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Input currents x [T,B,N0] and one label per sample.
struct LabeledBatch {
  Tensor x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  /// Samples `indices` (in that order) as a new batch.
  LabeledBatch gather(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const LabeledBatch&, const LabeledBatch&) = default;
};

/// Current that the active block (rate code) or a pulse (phase code) carries.
inline constexpr double kDriveCurrent = 0.5;

/// Deterministic train/test split, 80/20 per class, both shuffled.
std::pair<LabeledBatch, LabeledBatch> generate(const DatasetSpec& spec);

/// Features driven by class k under the rate code: [k*N0/K, (k+1)*N0/K).
std::pair<std::size_t, std::size_t> class_block(std::size_t k, std::size_t classes,
                                                std::size_t features);

/// Dataset CSV: `# dataset K,T,N0,B`, then one row per (sample, t) holding
/// N0 values; the t = 0 row of each sample carries the label as an extra
/// final column. K is recorded so labels can be range-checked on load.
void write_dataset(std::ostream& out, const LabeledBatch& batch, std::size_t classes);
LabeledBatch read_dataset(std::istream& in, std::size_t* classes = nullptr);

void save_dataset(const std::string& path, const LabeledBatch& batch, std::size_t classes);
LabeledBatch load_dataset(const std::string& path, std::size_t* classes = nullptr);

}  // namespace mpepsn
