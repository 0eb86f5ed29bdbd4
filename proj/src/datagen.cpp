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

#include "mpepsn/datagen.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mpepsn/rng.hpp"
#include "mpepsn/tensor_io.hpp"

namespace mpepsn {

void DatasetSpec::validate() const {
  if (classes < 2) throw ValueError("dataset needs at least 2 classes");
  if (time_steps < 2) throw ValueError("dataset needs at least 2 time steps");
  if (features < 2) throw ValueError("dataset needs at least 2 features");
  if (samples_per_class < 1) throw ValueError("dataset needs samples");
  if (!(noise_std >= 0.0)) throw ValueError("noise_std must be non-negative");
}

std::pair<std::size_t, std::size_t> class_block(std::size_t k, std::size_t classes,
                                                std::size_t features) {
  return {k * features / classes, (k + 1) * features / classes};
}

LabeledBatch LabeledBatch::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t T = x.extent(0), B = x.extent(1), N = x.extent(2);
  LabeledBatch out{Tensor({T, indices.size(), N}), {}};
  out.y.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    if (src >= B) throw ValueError("gather: sample index out of range");
    out.y.push_back(y[src]);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) out.x.at(t, j, n) = x.at(t, src, n);
  }
  return out;
}

namespace {

// Clean (noise-free) current of class k at (t, n).
double pattern(const DatasetSpec& spec, std::size_t k, std::size_t t, std::size_t n) {
  if (spec.kind == PatternKind::rate_coded) {
    auto [lo, hi] = class_block(k, spec.classes, spec.features);
    return n >= lo && n < hi ? kDriveCurrent : 0.0;
  }
  const std::size_t offset = k * spec.time_steps / spec.classes;
  return (offset + n) % spec.time_steps == t ? kDriveCurrent : 0.0;
}

void shuffle(std::vector<std::size_t>& order, Rng rng) {
  RngCursor cur(rng);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[cur.below(i)]);
  }
}

}  // namespace

std::pair<LabeledBatch, LabeledBatch> generate(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t K = spec.classes, T = spec.time_steps, N = spec.features;
  const std::size_t per = spec.samples_per_class;
  const std::size_t total = K * per;
  const Rng root(spec.seed);

  LabeledBatch all{Tensor({T, total, N}), std::vector<int>(total)};
  for (std::size_t k = 0; k < K; ++k) {
    const Rng noise = root.split(k);
    for (std::size_t s = 0; s < per; ++s) {
      const std::size_t b = k * per + s;
      all.y[b] = static_cast<int>(k);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
          double v = pattern(spec, k, t, n);
          if (spec.noise_std > 0.0) v += spec.noise_std * noise.normal((s * T + t) * N + n);
          all.x.at(t, b, n) = v;
        }
    }
  }

  const auto train_per = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(per)));
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t s = 0; s < per; ++s) {
      (s < train_per ? train_idx : test_idx).push_back(k * per + s);
    }
  shuffle(train_idx, root.split(1u << 20));
  shuffle(test_idx, root.split((1u << 20) + 1));
  return {all.gather(train_idx), all.gather(test_idx)};
}

void write_dataset(std::ostream& out, const LabeledBatch& batch, std::size_t classes) {
  require_rank3(batch.x, "write_dataset");
  const std::size_t T = batch.x.extent(0), B = batch.x.extent(1), N = batch.x.extent(2);
  if (batch.y.size() != B) throw ShapeError("write_dataset: label count differs from batch");
  out << "# dataset " << classes << ',' << T << ',' << N << ',' << B << '\n';
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t n = 0; n < N; ++n) {
        if (n) out << ',';
        out << format_real(batch.x.at(t, b, n));
      }
      if (t == 0) out << ',' << batch.y[b];
      out << '\n';
    }
}

LabeledBatch read_dataset(std::istream& in, std::size_t* classes_out) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(0, "empty dataset file");
  constexpr std::string_view kHeader = "# dataset ";
  if (std::string_view(line).substr(0, kHeader.size()) != kHeader) {
    throw ParseError(lineno, "expected '# dataset K,T,N0,B' header");
  }
  auto dims = split_csv(std::string_view(line).substr(kHeader.size()));
  if (dims.size() != 4) throw ParseError(lineno, "header needs K,T,N0,B");
  std::size_t ext[4];
  for (int i = 0; i < 4; ++i) {
    const double v = parse_real(dims[i], lineno);
    if (v < 0 || v != std::floor(v)) throw ParseError(lineno, "header extents must be integers");
    ext[i] = static_cast<std::size_t>(v);
  }
  const std::size_t K = ext[0], T = ext[1], N = ext[2], B = ext[3];
  if (K < 2 || T < 1 || N < 1) throw ParseError(lineno, "header extents out of range");

  LabeledBatch batch{Tensor({T, B, N}), std::vector<int>(B)};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      if (!std::getline(in, line)) {
        throw ParseError(lineno + 1, "file ends early: expected sample " + std::to_string(b) +
                                         " step " + std::to_string(t));
      }
      ++lineno;
      auto fields = split_csv(line);
      const std::size_t want = t == 0 ? N + 1 : N;
      if (fields.size() != want) {
        throw ParseError(lineno, "expected " + std::to_string(want) + " columns, found " +
                                     std::to_string(fields.size()));
      }
      for (std::size_t n = 0; n < N; ++n) batch.x.at(t, b, n) = parse_real(fields[n], lineno);
      if (t == 0) {
        const double label = parse_real(fields[N], lineno);
        if (label != std::floor(label) || label < 0 || label >= static_cast<double>(K)) {
          throw ParseError(lineno, "label must be an integer in [0, K)");
        }
        batch.y[b] = static_cast<int>(label);
      }
    }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw ParseError(lineno, "unexpected trailing row");
    }
  }
  if (classes_out) *classes_out = K;
  return batch;
}

void save_dataset(const std::string& path, const LabeledBatch& batch, std::size_t classes) {
  std::ostringstream out;
  write_dataset(out, batch, classes);
  write_file_atomic(path, out.str());
}

LabeledBatch load_dataset(const std::string& path, std::size_t* classes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_dataset(in, classes);
}

}  // namespace mpepsn
