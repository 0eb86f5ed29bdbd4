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

#include "mpepsn/tensor.hpp"

#include <functional>
#include <numeric>

namespace mpepsn {

std::size_t shape_size(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Tensor::Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.size() > 3) throw ShapeError("tensor rank above 3: " + shape_string(shape_));
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 3) throw ShapeError("tensor rank above 3: " + shape_string(shape_));
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t t, std::size_t b, std::size_t n) const {
  return data_[(t * shape_[1] + b) * shape_[2] + n];
}

double& Tensor::at(std::size_t t, std::size_t b, std::size_t n) {
  return data_[(t * shape_[1] + b) * shape_[2] + n];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

std::span<const double> Tensor::time_slice(std::size_t t) const {
  std::size_t row = shape_[1] * shape_[2];
  return std::span<const double>(data_).subspan(t * row, row);
}

std::span<double> Tensor::time_slice(std::size_t t) {
  std::size_t row = shape_[1] * shape_[2];
  return std::span<double>(data_).subspan(t * row, row);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank3(const Tensor& x, const char* what) {
  if (x.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected a [T,B,N] tensor, got " +
                     shape_string(x.shape()));
  }
}

}  // namespace mpepsn
