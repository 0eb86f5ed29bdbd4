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
#include <optional>
#include <span>

#include "mpepsn/parallel.hpp"
#include "mpepsn/rng.hpp"
#include "mpepsn/tensor.hpp"

namespace mpepsn {

/// Parameters of one spiking layer.
struct NeuronParams {
  /// Membrane decay per step, in (0, 1].
  double tau_m = 0.25;
  /// Firing threshold; learnable during training.
  double v_th = 1.0;
  /// Half-width of the triangular surrogate gradient.
  double alpha = 1.0;
  /// Hard-reset potential. Fixed.
  static constexpr double v_r = 0.0;

  /// Throws ValueError when tau_m or alpha is out of range.
  void validate() const;
};

/// How the previous-step membrane estimate is formed from the input current.
enum class EstimateMode {
  /// b ~ Bernoulli(sigmoid(I)), u_hat = (1 - b) * I.
  sampled,
  /// b replaced by its mean sigmoid(I). Deterministic.
  expectation,
};

/// Pre-spike membrane h, post-reset membrane u and spikes o, all [T,B,N].
struct Membrane {
  Tensor h;
  Tensor u;
  Tensor o;
};

/// Spike probability P, the Bernoulli draw b (or P itself in expectation
/// mode) and the membrane estimate u_hat.
struct Estimate {
  Tensor P;
  Tensor b;
  Tensor u_hat;
};

/// Every intermediate of one parallel forward pass.
struct ParallelTrace {
  Tensor I;
  Tensor P;
  Tensor b;
  Tensor u_hat;
  Tensor h;
  Tensor u;
  Tensor o;
};

/// 1 when h >= v_th (a tie fires), else 0.
inline double heaviside(double h, double v_th) noexcept { return h - v_th >= 0.0 ? 1.0 : 0.0; }
Tensor heaviside(const Tensor& h, double v_th, WorkerPool& pool = default_pool());

/// Vanilla LIF with hard reset, stepped through time:
///   h_t = tau_m * u_{t-1} + I_t,  o_t = [h_t >= v_th],  u_t = o_t ? v_r : h_t,
/// with u_{-1} = 0. This is the reference every parallel path is checked against.
Membrane lif_sequential(const Tensor& I, const NeuronParams& params);

/// Bernoulli membrane estimate from the input current alone. Sampled mode
/// requires `rng`; element i draws rng.uniform(i).
Estimate estimate_u_hat(const Tensor& I, EstimateMode mode, const std::optional<Rng>& rng,
                        WorkerPool& pool = default_pool());

/// Delays a [T,B,N] tensor one step: row t takes row t-1, row 0 is zero.
Tensor shift_time(const Tensor& x);

/// Charge, fire and reset for all time steps at once given each step's
/// previous membrane (`history`, already shifted):
///   h = tau_m * history + I,  o = [h >= v_th],  u = o ? v_r : h.
Membrane parallel_update(const Tensor& I, const Tensor& history, const NeuronParams& params,
                         WorkerPool& pool = default_pool());

/// MPE-PSN forward: estimate u_hat from I, delay it one step, then run
/// parallel_update. Row 0 sees a zero history and so matches lif_sequential.
ParallelTrace mpe_psn_forward(const Tensor& I, const NeuronParams& params, EstimateMode mode,
                              const std::optional<Rng>& rng, WorkerPool& pool = default_pool());

/// parallel_update driven by the true membrane history. Equal to
/// lif_sequential when `u_true` is its output.
Membrane teacher_forced_forward(const Tensor& I, const Tensor& u_true, const NeuronParams& params,
                                WorkerPool& pool = default_pool());

/// Elementwise squared difference (u_hat - u)^2.
Tensor estimation_error(const Tensor& u_hat, const Tensor& u);

// Forward-only kernels over flat [T, lanes] buffers, used for timing. They
// produce bit-identical u and o to lif_sequential / mpe_psn_forward.

/// Single-threaded time loop.
void lif_sequential_kernel(std::span<const double> I, std::size_t steps, const NeuronParams& params,
                           std::span<double> u, std::span<double> o);
/// One pool dispatch over lanes; no step waits on another step's output.
void mpe_psn_sampled_kernel(std::span<const double> I, std::size_t steps,
                            const NeuronParams& params, const Rng& rng, WorkerPool& pool,
                            std::span<double> u, std::span<double> o);

}  // namespace mpepsn
