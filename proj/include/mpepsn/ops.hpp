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
#include <vector>

#include "mpepsn/parallel.hpp"
#include "mpepsn/rng.hpp"
#include "mpepsn/tensor.hpp"

namespace mpepsn {

// Elementwise arithmetic. Shapes must match exactly; the only broadcast is a
// plain scalar on the right-hand side.
Tensor add(const Tensor& a, const Tensor& b, WorkerPool& pool = default_pool());
Tensor sub(const Tensor& a, const Tensor& b, WorkerPool& pool = default_pool());
Tensor mul(const Tensor& a, const Tensor& b, WorkerPool& pool = default_pool());
Tensor add(const Tensor& a, double b, WorkerPool& pool = default_pool());
Tensor scale(const Tensor& a, double s, WorkerPool& pool = default_pool());

/// Rank-2 product [M x K] * [K x P]. Each output element is summed over k in
/// increasing order, so results are identical for any worker count.
Tensor matmul(const Tensor& a, const Tensor& b, WorkerPool& pool = default_pool());

/// Logistic function, evaluated in a form that never overflows.
double sigmoid(double x) noexcept;
Tensor sigmoid(const Tensor& x, WorkerPool& pool = default_pool());

/// 1 where rng.uniform(flat index) < p, else 0. Every p must lie in [0, 1].
Tensor bernoulli_sample(const Tensor& p, const Rng& rng, WorkerPool& pool = default_pool());

enum class Reduction { sum, mean, l2_norm };

/// Reduces over `axes` (any order, no duplicates); the result keeps the
/// remaining axes in order. Summation runs in flat-index order.
Tensor reduce(Reduction op, const Tensor& x, std::vector<std::size_t> axes);
/// Reduction over every axis.
double reduce_all(Reduction op, const Tensor& x);

inline double sum(const Tensor& x) { return reduce_all(Reduction::sum, x); }
inline double mean(const Tensor& x) { return reduce_all(Reduction::mean, x); }
inline double l2_norm(const Tensor& x) { return reduce_all(Reduction::l2_norm, x); }

/// True when every element is finite.
bool all_finite(const Tensor& x) noexcept;

}  // namespace mpepsn
