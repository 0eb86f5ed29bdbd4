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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mpepsn/error.hpp"

namespace mpepsn {

/// Dense row-major array of doubles with up to three extents.
///
/// Spiking tensors use the layout [T, B, N]: time, batch, features. Weight
/// matrices are rank 2 and scalars produced by full reductions are rank 0
/// (one element, empty shape).
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(double value) { return Tensor(Shape{}, value); }
  /// Rank-1 tensor holding `values`.
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }

  /// Element of a rank-3 tensor.
  double at(std::size_t t, std::size_t b, std::size_t n) const;
  double& at(std::size_t t, std::size_t b, std::size_t n);

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  /// Value of a one-element tensor.
  double item() const;

  /// Same data, new extents with equal product.
  Tensor reshaped(Shape shape) const;

  /// Contiguous row block [t, :, :] of a rank-3 tensor.
  std::span<const double> time_slice(std::size_t t) const;
  std::span<double> time_slice(std::size_t t);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Tensor::Shape& shape);
std::string shape_string(const Tensor::Shape& shape);

/// Throws ShapeError naming `what` when the two shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
/// Throws ShapeError unless `x` is rank 3.
void require_rank3(const Tensor& x, const char* what);

}  // namespace mpepsn
