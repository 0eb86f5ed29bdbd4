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

#include "mpepsn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mpepsn {

void MemLossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValueError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (!(kappa_init >= 0.0)) throw ValueError("kappa_init must be non-negative");
}

std::size_t MemLossConfig::kappa_length(const Tensor::Shape& shape) const {
  if (shape.size() != 3) throw ShapeError("membrane loss needs [T,B,N] tensors");
  return kappa_axis == KappaAxis::time ? shape[0] : shape[2];
}

namespace {

// Per-slot mean squared error along the kappa axis.
std::vector<double> slot_mse(const Tensor& u_hat, const Tensor& u_target, const Tensor& kappa,
                             KappaAxis axis) {
  require_rank3(u_hat, "mem_loss");
  require_same_shape(u_hat, u_target, "mem_loss");
  const std::size_t T = u_hat.extent(0), B = u_hat.extent(1), N = u_hat.extent(2);
  const std::size_t slots = axis == KappaAxis::time ? T : N;
  if (kappa.size() != slots) {
    throw ShapeError("mem_loss: kappa has " + std::to_string(kappa.size()) + " entries, axis has " +
                     std::to_string(slots));
  }
  const std::size_t per_slot = axis == KappaAxis::time ? B * N : T * B;
  if (per_slot == 0) throw ShapeError("mem_loss: empty tensor");
  std::vector<double> acc(slots, 0.0);
  for (std::size_t i = 0; i < u_hat.size(); ++i) {
    const double d = u_hat[i] - u_target[i];
    const std::size_t slot = axis == KappaAxis::time ? i / (B * N) : i % N;
    acc[slot] += d * d;
  }
  for (double& a : acc) a /= static_cast<double>(per_slot);
  return acc;
}

struct CrossEntropy {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank3(logits, "cls_loss");
  const std::size_t T = logits.extent(0), B = logits.extent(1), K = logits.extent(2);
  if (K < 2) throw ValueError("cls_loss: need at least two classes");
  if (labels.size() != B) {
    throw ShapeError("cls_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw ValueError("cls_loss: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(K) + ")");
    }
  }
  if (T == 0 || B == 0) throw ShapeError("cls_loss: empty logits");
  CrossEntropy ce{0.0, Tensor(logits.shape())};
  const double scale = 1.0 / static_cast<double>(T * B);
  std::vector<double> prob(K);
  for (std::size_t t = 0; t < T; ++t) {
    double step = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* z = logits.data().data() + (t * B + b) * K;
      const double zmax = *std::max_element(z, z + K);
      double denom = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        prob[k] = std::exp(z[k] - zmax);
        denom += prob[k];
      }
      const auto y = static_cast<std::size_t>(labels[b]);
      step += std::log(denom) - (z[y] - zmax);
      double* g = ce.grad.data().data() + (t * B + b) * K;
      for (std::size_t k = 0; k < K; ++k) {
        g[k] = (prob[k] / denom - (k == y ? 1.0 : 0.0)) * scale;
      }
    }
    ce.loss += step / static_cast<double>(B);
  }
  ce.loss /= static_cast<double>(T);
  return ce;
}

}  // namespace

double mem_loss(const Tensor& u_hat, const Tensor& u_target, const Tensor& kappa,
                KappaAxis axis) {
  auto mse = slot_mse(u_hat, u_target, kappa, axis);
  double total = 0.0;
  for (std::size_t k = 0; k < mse.size(); ++k) total += kappa[k] * mse[k];
  return total;
}

double cls_loss(const Tensor& logits, std::span<const int> labels) {
  return cross_entropy(logits, labels).loss;
}

double total_loss(double l_cls, double l_mem, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValueError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return (1.0 - lambda) * l_cls + lambda * l_mem;
}

namespace ag {

Var mem_loss(Tape& tape, Var u_hat, const Tensor& u_target, Var kappa, KappaAxis axis) {
  const Tensor& est = tape.value(u_hat);
  const Tensor& w = tape.value(kappa);
  auto mse = slot_mse(est, u_target, w, axis);
  double total = 0.0;
  for (std::size_t k = 0; k < mse.size(); ++k) total += w[k] * mse[k];
  Tensor target = u_target;
  Tensor weights = w;
  return tape.record(
      Tensor::scalar(total), {u_hat, kappa},
      [est, target, weights, mse, axis](const Tensor& up, GradSink& s) {
        const std::size_t B = est.extent(1), N = est.extent(2), T = est.extent(0);
        const double per_slot = static_cast<double>(axis == KappaAxis::time ? B * N : T * B);
        if (s.wants(0)) {
          Tensor& g = s.at(0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t slot = axis == KappaAxis::time ? i / (B * N) : i % N;
            g[i] += up[0] * weights[slot] * 2.0 * (est[i] - target[i]) / per_slot;
          }
        }
        if (s.wants(1)) {
          Tensor& g = s.at(1);
          for (std::size_t k = 0; k < mse.size(); ++k) g[k] += up[0] * mse[k];
        }
      });
}

Var cls_loss(Tape& tape, Var logits, std::span<const int> labels) {
  CrossEntropy ce = cross_entropy(tape.value(logits), labels);
  return tape.record(Tensor::scalar(ce.loss), {logits},
                     [grad = std::move(ce.grad)](const Tensor& up, GradSink& s) {
                       if (!s.wants(0)) return;
                       Tensor& g = s.at(0);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[0] * grad[i];
                     });
}

Var total_loss(Tape& tape, Var l_cls, Var l_mem, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValueError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return add(tape, scale(tape, l_cls, 1.0 - lambda), scale(tape, l_mem, lambda));
}

}  // namespace ag

}  // namespace mpepsn
