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

#include "mpepsn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mpepsn {

namespace {

template <typename Fn>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* what, WorkerPool& pool, Fn fn) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  pool.run(
      out.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) z[i] = fn(x[i], y[i]);
      },
      kParallelGrain);
  return out;
}

template <typename Fn>
Tensor map_unary(const Tensor& a, WorkerPool& pool, Fn fn) {
  Tensor out(a.shape());
  auto x = a.data();
  auto z = out.data();
  pool.run(
      out.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) z[i] = fn(x[i]);
      },
      kParallelGrain);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, WorkerPool& pool) {
  return map_binary(a, b, "add", pool, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b, WorkerPool& pool) {
  return map_binary(a, b, "sub", pool, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b, WorkerPool& pool) {
  return map_binary(a, b, "mul", pool, [](double x, double y) { return x * y; });
}

Tensor add(const Tensor& a, double b, WorkerPool& pool) {
  return map_unary(a, pool, [b](double x) { return x + b; });
}

Tensor scale(const Tensor& a, double s, WorkerPool& pool) {
  return map_unary(a, pool, [s](double x) { return x * s; });
}

Tensor matmul(const Tensor& a, const Tensor& b, WorkerPool& pool) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expected rank-2 operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), p = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out({m, p});
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  pool.run(
      m,
      [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
          double* row = z.data() + r * p;
          // k outer keeps the per-element summation order fixed (k ascending)
          // while streaming rows of b.
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = x[r * k + kk];
            const double* brow = y.data() + kk * p;
            for (std::size_t c = 0; c < p; ++c) row[c] += av * brow[c];
          }
        }
      },
      std::max<std::size_t>(1, kParallelGrain / std::max<std::size_t>(1, k * p)));
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x, WorkerPool& pool) {
  return map_unary(x, pool, [](double v) { return sigmoid(v); });
}

Tensor bernoulli_sample(const Tensor& p, const Rng& rng, WorkerPool& pool) {
  for (double v : p.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValueError("bernoulli_sample: probability outside [0,1]: " + std::to_string(v));
    }
  }
  Tensor out(p.shape());
  auto src = p.data();
  auto dst = out.data();
  pool.run(
      out.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) dst[i] = rng.uniform(i) < src[i] ? 1.0 : 0.0;
      },
      kParallelGrain);
  return out;
}

Tensor reduce(Reduction op, const Tensor& x, std::vector<std::size_t> axes) {
  const std::size_t rank = x.rank();
  std::vector<bool> reduced(rank, false);
  for (std::size_t ax : axes) {
    if (ax >= rank) {
      throw ShapeError("reduce: axis " + std::to_string(ax) + " invalid for " +
                       shape_string(x.shape()));
    }
    if (reduced[ax]) throw ShapeError("reduce: duplicate axis " + std::to_string(ax));
    reduced[ax] = true;
  }

  Tensor::Shape kept;
  std::size_t count = 1;
  for (std::size_t ax = 0; ax < rank; ++ax) {
    if (reduced[ax]) {
      count *= x.shape()[ax];
    } else {
      kept.push_back(x.shape()[ax]);
    }
  }
  if (op == Reduction::mean && count == 0) throw ShapeError("reduce: mean over an empty axis");

  Tensor out(kept, 0.0);
  // Walk x in flat order and route each element to its output slot; every
  // output accumulates its inputs in increasing flat index.
  std::vector<std::size_t> stride_out(rank, 0);
  {
    std::size_t s = 1;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (!reduced[ax]) {
        stride_out[ax] = s;
        s *= x.shape()[ax];
      }
    }
  }
  std::vector<std::size_t> idx(rank, 0);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t o = 0;
    for (std::size_t ax = 0; ax < rank; ++ax) o += idx[ax] * stride_out[ax];
    const double v = src[i];
    dst[o] += op == Reduction::l2_norm ? v * v : v;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++idx[ax] < x.shape()[ax]) break;
      idx[ax] = 0;
    }
  }
  for (double& v : dst) {
    if (op == Reduction::mean) v /= static_cast<double>(count);
    if (op == Reduction::l2_norm) v = std::sqrt(v);
  }
  return out;
}

double reduce_all(Reduction op, const Tensor& x) {
  if (op == Reduction::mean && x.empty()) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += op == Reduction::l2_norm ? v * v : v;
  if (op == Reduction::mean) return acc / static_cast<double>(x.size());
  if (op == Reduction::l2_norm) return std::sqrt(acc);
  return acc;
}

bool all_finite(const Tensor& x) noexcept {
  return std::all_of(x.data().begin(), x.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mpepsn
