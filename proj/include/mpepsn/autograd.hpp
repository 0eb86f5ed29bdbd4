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
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpepsn/neuron.hpp"
#include "mpepsn/tensor.hpp"

namespace mpepsn {

/// Named learnable tensors with accumulated gradients and momentum buffers.
class ParamRegistry {
 public:
  enum class Kind { weight, bias, threshold, kappa };

  struct Param {
    std::string name;
    Kind kind;
    Tensor value;
    Tensor grad;
    Tensor velocity;
  };

  /// Registers a parameter; names are unique. Returns its index.
  std::size_t add(std::string name, Kind kind, Tensor init);

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](std::size_t i) { return params_.at(i); }
  const Param& operator[](std::size_t i) const { return params_.at(i); }
  std::size_t index_of(const std::string& name) const;
  Param& get(const std::string& name) { return params_[index_of(name)]; }
  const Param& get(const std::string& name) const { return params_[index_of(name)]; }

  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }

  void zero_grad();

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Receives gradient contributions for a node's inputs during backward.
class GradSink {
 public:
  virtual ~GradSink() = default;
  /// Whether input `i` leads to anything that needs a gradient.
  virtual bool wants(std::size_t i) const = 0;
  /// Accumulator for input `i`, zero-initialised on first use.
  virtual Tensor& at(std::size_t i) = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
/// acyclic by construction and backward visits each node once, newest first.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& upstream, GradSink& sink)>;

  explicit Tape(ParamRegistry* registry = nullptr) : registry_(registry) {}

  /// Value that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (read it with grad()).
  Var leaf(Tensor value);
  /// Leaf bound to registry parameter `index`; backward adds into its grad.
  Var param(std::size_t index);
  Var param(const std::string& name);

  /// Appends an interior node. `backward` maps the upstream gradient to the
  /// inputs' gradients.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target with respect to v (zeros if none).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and runs the chain rule to every leaf.
  /// `loss` must hold one element. A tape runs backward at most once.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  ParamRegistry* registry() const noexcept { return registry_; }

  /// Records the outcome of a discontinuous step (spikes, Bernoulli draws).
  /// Finite-difference checking compares these between perturbed passes.
  void note_discrete(const Tensor& outcome);
  const std::vector<double>& discrete_signature() const noexcept { return discrete_; }

 private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<std::size_t> param;
  };

  const Node& node(Var v) const;

  ParamRegistry* registry_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool backward_done_ = false;
  std::vector<double> discrete_;
};

/// Triangular surrogate for d(spike)/dh: max(0, alpha - |h - v_th|) / alpha^2.
inline double surrogate_grad(double h, double v_th, double alpha) noexcept {
  const double d = alpha - (h > v_th ? h - v_th : v_th - h);
  return d > 0.0 ? d / (alpha * alpha) : 0.0;
}
Tensor surrogate_grad(const Tensor& h, double v_th, double alpha);

/// Differentiable operations. Every op reads values from and appends to the
/// tape that owns its inputs.
namespace ag {

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double s);
/// a * c with c treated as a constant.
Var mul_const(Tape& tape, Var a, const Tensor& c);
Var matmul(Tape& tape, Var a, Var b);
Var sigmoid(Tape& tape, Var a);
Var square(Tape& tape, Var a);
Var sum(Tape& tape, Var a);
Var mean(Tape& tape, Var a);

/// x [T,B,Nin] times W [Nin,Nout] at every step, plus an optional bias
/// [Nout]. With delay 1 step t reads x at t-1 and step 0 sees zeros.
Var linear(Tape& tape, Var x, Var w, std::optional<Var> bias, int delay);

/// Delays a [T,B,N] value by one step (row 0 becomes zero).
Var shift_time(Tape& tape, Var x);
/// Row t of a [T,B,N] value, as [1,B,N].
Var time_slice(Tape& tape, Var x, std::size_t t);
/// Stacks [1,B,N] values into [T,B,N].
Var time_concat(Tape& tape, const std::vector<Var>& rows);

/// o = [h >= v_th]. Backward: dh = upstream * surrogate(h),
/// dv_th = -sum(upstream * surrogate(h)). v_th is a one-element value.
Var spike(Tape& tape, Var h, Var v_th, double alpha);
/// u = o ? v_r : h, differentiated as u = h * (1 - o).
Var reset(Tape& tape, Var h, Var o);

/// Outputs of a spiking layer recorded on the tape.
struct NeuronVars {
  Var o;
  Var u;
  Var h;
  /// Only set for the parallel neuron.
  std::optional<Var> u_hat;
  Tensor P;
  Tensor b;
};

/// Parallel MPE-PSN layer: u_hat = (1 - b) * I with b held constant, then
/// h = tau_m * shift(u_hat) + I, spike and reset.
NeuronVars mpe_psn(Tape& tape, Var I, Var v_th, const NeuronParams& params, EstimateMode mode,
                   const std::optional<Rng>& rng);

/// Sequential LIF layer as a single node with a hand-written
/// backpropagation-through-time rule.
NeuronVars lif(Tape& tape, Var I, Var v_th, const NeuronParams& params);

/// The same LIF recurrence composed from per-step generic nodes; slower,
/// used to cross-check the fused rule.
NeuronVars lif_unrolled(Tape& tape, Var I, Var v_th, const NeuronParams& params);

}  // namespace ag

/// Result of a finite-difference gradient check.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// "name[i]" for coordinates whose perturbation flipped a spike or sample.
  std::vector<std::string> skipped;
  /// Worst coordinate, "name[i]".
  std::string worst;
};

/// Compares tape gradients against central differences
/// (f(p + step) - f(p - step)) / (2 step) for every coordinate of every
/// registry parameter. Relative error is |g - fd| / max(|g|, |fd|, floor).
GradCheckReport finite_diff_check(ParamRegistry& registry,
                                  const std::function<Var(Tape&)>& build_loss, double step,
                                  double floor = 1e-6);

/// Classical momentum SGD: v <- momentum * v + g, p <- p - lr * v. Zeroes
/// gradients afterwards and clamps kappa parameters at zero. Kappa steps use
/// lr * kappa_lr_scale.
void sgd_step(ParamRegistry& registry, double lr, double momentum, double kappa_lr_scale = 1.0);

}  // namespace mpepsn
