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
#include <span>

#include "mpepsn/autograd.hpp"
#include "mpepsn/tensor.hpp"

namespace mpepsn {

/// Which axis the membrane-loss weights index.
enum class KappaAxis {
  /// One weight per time step (length T).
  time,
  /// One weight per neuron (length N).
  neuron,
};

/// Settings of the membrane-approximation loss.
struct MemLossConfig {
  double lambda = 0.01;
  KappaAxis kappa_axis = KappaAxis::time;
  double kappa_init = 1.0;

  void validate() const;
  /// Number of weights needed for a [T,B,N] layer.
  std::size_t kappa_length(const Tensor::Shape& shape) const;
};

/// sum_k kappa[k] * mean over the other axes of (u_hat - u_target)^2, where k
/// runs over the kappa axis. `u_target` is treated as a fixed target.
double mem_loss(const Tensor& u_hat, const Tensor& u_target, const Tensor& kappa,
                KappaAxis axis);

/// Time-averaged softmax cross-entropy of logits [T,B,K] against labels [B].
double cls_loss(const Tensor& logits, std::span<const int> labels);

/// (1 - lambda) * l_cls + lambda * l_mem.
double total_loss(double l_cls, double l_mem, double lambda);

namespace ag {

/// Differentiable mem_loss; gradients flow to u_hat and kappa only.
Var mem_loss(Tape& tape, Var u_hat, const Tensor& u_target, Var kappa, KappaAxis axis);
/// Differentiable cls_loss; gradients flow to the logits.
Var cls_loss(Tape& tape, Var logits, std::span<const int> labels);
/// Differentiable total_loss.
Var total_loss(Tape& tape, Var l_cls, Var l_mem, double lambda);

}  // namespace ag

}  // namespace mpepsn
