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

#include "mpepsn/neuron.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mpepsn/ops.hpp"

namespace mpepsn {

void NeuronParams::validate() const {
  if (!(tau_m > 0.0 && tau_m <= 1.0)) {
    throw ValueError("tau_m must lie in (0, 1], got " + std::to_string(tau_m));
  }
  if (!(alpha > 0.0)) throw ValueError("alpha must be positive, got " + std::to_string(alpha));
  if (!std::isfinite(v_th)) throw ValueError("v_th must be finite");
}

Tensor heaviside(const Tensor& h, double v_th, WorkerPool& pool) {
  Tensor o(h.shape());
  auto src = h.data();
  auto dst = o.data();
  pool.run(
      o.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) dst[i] = heaviside(src[i], v_th);
      },
      kParallelGrain);
  return o;
}

void lif_sequential_kernel(std::span<const double> I, std::size_t steps,
                           const NeuronParams& params, std::span<double> u, std::span<double> o) {
  const std::size_t lanes = steps == 0 ? 0 : I.size() / steps;
  const double tau = params.tau_m;
  const double v_th = params.v_th;
  for (std::size_t t = 0; t < steps; ++t) {
    const double* in = I.data() + t * lanes;
    const double* prev = t == 0 ? nullptr : u.data() + (t - 1) * lanes;
    double* ut = u.data() + t * lanes;
    double* ot = o.data() + t * lanes;
    for (std::size_t j = 0; j < lanes; ++j) {
      const double h = tau * (prev ? prev[j] : 0.0) + in[j];
      const double fire = heaviside(h, v_th);
      ot[j] = fire;
      ut[j] = fire != 0.0 ? NeuronParams::v_r : h;
    }
  }
}

Membrane lif_sequential(const Tensor& I, const NeuronParams& params) {
  require_rank3(I, "lif_sequential");
  params.validate();
  const std::size_t steps = I.extent(0);
  const std::size_t lanes = I.extent(1) * I.extent(2);
  Membrane m{Tensor(I.shape()), Tensor(I.shape()), Tensor(I.shape())};
  for (std::size_t t = 0; t < steps; ++t) {
    auto in = I.time_slice(t);
    auto h = m.h.time_slice(t);
    auto u = m.u.time_slice(t);
    auto o = m.o.time_slice(t);
    for (std::size_t j = 0; j < lanes; ++j) {
      const double prev = t == 0 ? 0.0 : m.u.time_slice(t - 1)[j];
      h[j] = params.tau_m * prev + in[j];
      o[j] = heaviside(h[j], params.v_th);
      u[j] = o[j] != 0.0 ? NeuronParams::v_r : h[j];
    }
  }
  return m;
}

Estimate estimate_u_hat(const Tensor& I, EstimateMode mode, const std::optional<Rng>& rng,
                        WorkerPool& pool) {
  if (mode == EstimateMode::sampled && !rng) {
    throw ValueError("estimate_u_hat: sampled mode needs a random stream");
  }
  Estimate est;
  est.P = sigmoid(I, pool);
  est.b = mode == EstimateMode::sampled ? bernoulli_sample(est.P, *rng, pool) : est.P;
  est.u_hat = Tensor(I.shape());
  auto b = est.b.data();
  auto in = I.data();
  auto out = est.u_hat.data();
  pool.run(
      I.size(),
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) out[i] = (1.0 - b[i]) * in[i];
      },
      kParallelGrain);
  return est;
}

Tensor shift_time(const Tensor& x) {
  require_rank3(x, "shift_time");
  Tensor out(x.shape(), 0.0);
  for (std::size_t t = 1; t < x.extent(0); ++t) {
    auto src = x.time_slice(t - 1);
    std::copy(src.begin(), src.end(), out.time_slice(t).begin());
  }
  return out;
}

Membrane parallel_update(const Tensor& I, const Tensor& history, const NeuronParams& params,
                         WorkerPool& pool) {
  require_rank3(I, "parallel_update");
  require_same_shape(I, history, "parallel_update");
  params.validate();
  Membrane m{Tensor(I.shape()), Tensor(I.shape()), Tensor(I.shape())};
  auto in = I.data();
  auto prev = history.data();
  auto h = m.h.data();
  auto u = m.u.data();
  auto o = m.o.data();
  const double tau = params.tau_m;
  const double v_th = params.v_th;
  pool.run(
      I.size(),
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          h[i] = tau * prev[i] + in[i];
          o[i] = heaviside(h[i], v_th);
          u[i] = o[i] != 0.0 ? NeuronParams::v_r : h[i];
        }
      },
      kParallelGrain);
  return m;
}

ParallelTrace mpe_psn_forward(const Tensor& I, const NeuronParams& params, EstimateMode mode,
                              const std::optional<Rng>& rng, WorkerPool& pool) {
  require_rank3(I, "mpe_psn_forward");
  Estimate est = estimate_u_hat(I, mode, rng, pool);
  Membrane m = parallel_update(I, shift_time(est.u_hat), params, pool);
  return ParallelTrace{I,
                       std::move(est.P),
                       std::move(est.b),
                       std::move(est.u_hat),
                       std::move(m.h),
                       std::move(m.u),
                       std::move(m.o)};
}

Membrane teacher_forced_forward(const Tensor& I, const Tensor& u_true, const NeuronParams& params,
                                WorkerPool& pool) {
  require_rank3(I, "teacher_forced_forward");
  require_same_shape(I, u_true, "teacher_forced_forward");
  return parallel_update(I, shift_time(u_true), params, pool);
}

Tensor estimation_error(const Tensor& u_hat, const Tensor& u) {
  require_same_shape(u_hat, u, "estimation_error");
  Tensor out(u.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = u_hat[i] - u[i];
    out[i] = d * d;
  }
  return out;
}

void mpe_psn_sampled_kernel(std::span<const double> I, std::size_t steps,
                            const NeuronParams& params, const Rng& rng, WorkerPool& pool,
                            std::span<double> u, std::span<double> o) {
  const std::size_t lanes = steps == 0 ? 0 : I.size() / steps;
  const double tau = params.tau_m;
  const double v_th = params.v_th;
  // Lanes are processed in cache-sized blocks. Each lane carries its estimate
  // from step t-1; the estimate is a function of I alone, so lanes and steps
  // never wait on each other's spikes. The last step's estimate is never
  // consumed and is not drawn.
  constexpr std::size_t kBlock = 512;
  pool.run(lanes, [&](std::size_t lo, std::size_t hi) {
    std::array<double, kBlock> history;
    for (std::size_t j0 = lo; j0 < hi; j0 += kBlock) {
      const std::size_t width = std::min(kBlock, hi - j0);
      double* hist = history.data();
      std::fill_n(hist, width, 0.0);
      for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t row = t * lanes + j0;
        const double* in = I.data() + row;
        double* ut = u.data() + row;
        double* ot = o.data() + row;
        for (std::size_t j = 0; j < width; ++j) {
          const double h = tau * hist[j] + in[j];
          const double fire = heaviside(h, v_th);
          ot[j] = fire;
          ut[j] = fire != 0.0 ? NeuronParams::v_r : h;
        }
        if (t + 1 == steps) break;
        for (std::size_t j = 0; j < width; ++j) {
          hist[j] = rng.uniform(row + j) < sigmoid(in[j]) ? 0.0 : in[j];
        }
      }
    }
  });
}

}  // namespace mpepsn
