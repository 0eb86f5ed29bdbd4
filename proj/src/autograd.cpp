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

#include "mpepsn/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "mpepsn/ops.hpp"

namespace mpepsn {

// ---------------------------------------------------------------------------
// ParamRegistry

std::size_t ParamRegistry::add(std::string name, Kind kind, Tensor init) {
  if (index_.contains(name)) throw ValueError("parameter '" + name + "' registered twice");
  if (!all_finite(init)) throw ValueError("parameter '" + name + "' has non-finite values");
  const std::size_t i = params_.size();
  index_.emplace(name, i);
  Tensor zeros(init.shape());
  params_.push_back(Param{std::move(name), kind, std::move(init), zeros, zeros});
  return i;
}

std::size_t ParamRegistry::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamRegistry::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false, std::nullopt});
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, true, std::nullopt});
  return Var{nodes_.size() - 1};
}

Var Tape::param(std::size_t index) {
  if (registry_ == nullptr) throw Error("tape has no parameter registry");
  nodes_.push_back(Node{(*registry_)[index].value, {}, nullptr, true, index});
  return Var{nodes_.size() - 1};
}

Var Tape::param(const std::string& name) {
  if (registry_ == nullptr) throw Error("tape has no parameter registry");
  return param(registry_->index_of(name));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr,
                        needs, std::nullopt});
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (v.id < grads_.size() && grads_[v.id].shape() == n.value.shape() && !grads_[v.id].empty()) {
    return grads_[v.id];
  }
  return Tensor(n.value.shape());
}

void Tape::note_discrete(const Tensor& outcome) {
  discrete_.insert(discrete_.end(), outcome.data().begin(), outcome.data().end());
}

namespace {

class NodeSink final : public GradSink {
 public:
  NodeSink(const std::vector<Var>& inputs, std::vector<Tensor>& grads,
           const std::vector<bool>& needs, const std::vector<const Tensor*>& values)
      : inputs_(inputs), grads_(grads), needs_(needs), values_(values) {}

  bool wants(std::size_t i) const override { return i < inputs_.size() && needs_[inputs_[i].id]; }

  Tensor& at(std::size_t i) override {
    Tensor& g = grads_[inputs_[i].id];
    if (g.shape() != values_[inputs_[i].id]->shape() || g.empty()) {
      g = Tensor(values_[inputs_[i].id]->shape());
    }
    return g;
  }

 private:
  const std::vector<Var>& inputs_;
  std::vector<Tensor>& grads_;
  const std::vector<bool>& needs_;
  const std::vector<const Tensor*>& values_;
};

}  // namespace

void Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (backward_done_) throw Error("backward already ran on this tape");
  if (root.value.size() != 1) {
    throw ShapeError("backward needs a one-element loss, got " + shape_string(root.value.shape()));
  }
  if (!root.requires_grad) throw Error("loss does not depend on any differentiable input");
  backward_done_ = true;

  std::vector<bool> needs(nodes_.size());
  std::vector<const Tensor*> values(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    needs[i] = nodes_[i].requires_grad;
    values[i] = &nodes_[i].value;
  }
  // Tensor() is rank 0 with one element; mark "no gradient yet" with an
  // empty rank-1 tensor instead.
  grads_.assign(nodes_.size(), Tensor(Tensor::Shape{0}));
  grads_[loss.id] = Tensor(root.value.shape(), 1.0);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || grads_[id].empty()) continue;
    if (n.param) {
      Tensor& acc = (*registry_)[*n.param].grad;
      const Tensor& g = grads_[id];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
      continue;
    }
    if (!n.backward) continue;
    NodeSink sink(n.inputs, grads_, needs, values);
    n.backward(grads_[id], sink);
  }
}

Tensor surrogate_grad(const Tensor& h, double v_th, double alpha) {
  if (!(alpha > 0.0)) throw ValueError("surrogate alpha must be positive");
  Tensor out(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = surrogate_grad(h[i], v_th, alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable ops

namespace ag {

namespace {

void accumulate(Tensor& dst, const Tensor& src, double factor = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  Tensor v = mpepsn::add(tape.value(a), tape.value(b));
  return tape.record(std::move(v), {a, b}, [](const Tensor& up, GradSink& s) {
    if (s.wants(0)) accumulate(s.at(0), up);
    if (s.wants(1)) accumulate(s.at(1), up);
  });
}

Var sub(Tape& tape, Var a, Var b) {
  Tensor v = mpepsn::sub(tape.value(a), tape.value(b));
  return tape.record(std::move(v), {a, b}, [](const Tensor& up, GradSink& s) {
    if (s.wants(0)) accumulate(s.at(0), up);
    if (s.wants(1)) accumulate(s.at(1), up, -1.0);
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  Tensor v = mpepsn::mul(x, y);
  return tape.record(std::move(v), {a, b}, [x, y](const Tensor& up, GradSink& s) {
    if (s.wants(0)) {
      Tensor& g = s.at(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * y[i];
    }
    if (s.wants(1)) {
      Tensor& g = s.at(1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * x[i];
    }
  });
}

Var scale(Tape& tape, Var a, double c) {
  Tensor v = mpepsn::scale(tape.value(a), c);
  return tape.record(std::move(v), {a}, [c](const Tensor& up, GradSink& s) {
    if (s.wants(0)) accumulate(s.at(0), up, c);
  });
}

Var mul_const(Tape& tape, Var a, const Tensor& c) {
  Tensor v = mpepsn::mul(tape.value(a), c);
  return tape.record(std::move(v), {a}, [c](const Tensor& up, GradSink& s) {
    if (!s.wants(0)) return;
    Tensor& g = s.at(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * c[i];
  });
}

Var matmul(Tape& tape, Var a, Var b) {
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  Tensor v = mpepsn::matmul(x, y);
  const std::size_t m = x.extent(0), k = x.extent(1), p = y.extent(1);
  return tape.record(std::move(v), {a, b}, [x, y, m, k, p](const Tensor& up, GradSink& s) {
    if (s.wants(0)) {
      Tensor& g = s.at(0);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (std::size_t c = 0; c < p; ++c) acc += up[r * p + c] * y[kk * p + c];
          g[r * k + kk] += acc;
        }
    }
    if (s.wants(1)) {
      Tensor& g = s.at(1);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double xv = x[r * k + kk];
          for (std::size_t c = 0; c < p; ++c) g[kk * p + c] += xv * up[r * p + c];
        }
    }
  });
}

Var sigmoid(Tape& tape, Var a) {
  Tensor v = mpepsn::sigmoid(tape.value(a));
  Tensor y = v;
  return tape.record(std::move(v), {a}, [y](const Tensor& up, GradSink& s) {
    if (!s.wants(0)) return;
    Tensor& g = s.at(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * y[i] * (1.0 - y[i]);
  });
}

Var square(Tape& tape, Var a) {
  const Tensor& x = tape.value(a);
  Tensor v = mpepsn::mul(x, x);
  return tape.record(std::move(v), {a}, [x](const Tensor& up, GradSink& s) {
    if (!s.wants(0)) return;
    Tensor& g = s.at(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * up[i];
  });
}

Var sum(Tape& tape, Var a) {
  return tape.record(Tensor::scalar(mpepsn::sum(tape.value(a))), {a},
                     [](const Tensor& up, GradSink& s) {
                       if (!s.wants(0)) return;
                       Tensor& g = s.at(0);
                       for (double& gi : g.data()) gi += up[0];
                     });
}

Var mean(Tape& tape, Var a) {
  const double n = static_cast<double>(tape.value(a).size());
  return tape.record(Tensor::scalar(mpepsn::mean(tape.value(a))), {a},
                     [n](const Tensor& up, GradSink& s) {
                       if (!s.wants(0)) return;
                       Tensor& g = s.at(0);
                       for (double& gi : g.data()) gi += up[0] / n;
                     });
}

Var linear(Tape& tape, Var x, Var w, std::optional<Var> bias, int delay) {
  if (delay != 0 && delay != 1) throw ValueError("synaptic delay must be 0 or 1");
  if (delay == 1) x = shift_time(tape, x);
  const Tensor& in = tape.value(x);
  const Tensor& weight = tape.value(w);
  require_rank3(in, "linear");
  if (weight.rank() != 2 || weight.extent(0) != in.extent(2)) {
    throw ShapeError("linear: weight " + shape_string(weight.shape()) + " does not fit input " +
                     shape_string(in.shape()));
  }
  const std::size_t rows = in.extent(0) * in.extent(1);
  const std::size_t nin = in.extent(2), nout = weight.extent(1);
  Tensor out = mpepsn::matmul(in.reshaped({rows, nin}), weight);
  std::vector<Var> inputs{x, w};
  if (bias) {
    const Tensor& bv = tape.value(*bias);
    if (bv.rank() != 1 || bv.extent(0) != nout) {
      throw ShapeError("linear: bias " + shape_string(bv.shape()) + " does not fit " +
                       std::to_string(nout) + " outputs");
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < nout; ++c) out[r * nout + c] += bv[c];
    inputs.push_back(*bias);
  }
  out = out.reshaped({in.extent(0), in.extent(1), nout});
  return tape.record(std::move(out), std::move(inputs),
                     [in, weight, rows, nin, nout](const Tensor& up, GradSink& s) {
                       if (s.wants(0)) {
                         Tensor& g = s.at(0);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t k = 0; k < nin; ++k) {
                             double acc = 0.0;
                             for (std::size_t c = 0; c < nout; ++c)
                               acc += up[r * nout + c] * weight[k * nout + c];
                             g[r * nin + k] += acc;
                           }
                       }
                       if (s.wants(1)) {
                         Tensor& g = s.at(1);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t k = 0; k < nin; ++k) {
                             const double xv = in[r * nin + k];
                             if (xv == 0.0) continue;
                             for (std::size_t c = 0; c < nout; ++c)
                               g[k * nout + c] += xv * up[r * nout + c];
                           }
                       }
                       if (s.wants(2)) {
                         Tensor& g = s.at(2);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < nout; ++c) g[c] += up[r * nout + c];
                       }
                     });
}

Var shift_time(Tape& tape, Var x) {
  Tensor v = mpepsn::shift_time(tape.value(x));
  return tape.record(std::move(v), {x}, [](const Tensor& up, GradSink& s) {
    if (!s.wants(0)) return;
    Tensor& g = s.at(0);
    for (std::size_t t = 0; t + 1 < up.extent(0); ++t) {
      auto src = up.time_slice(t + 1);
      auto dst = g.time_slice(t);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  });
}

Var time_slice(Tape& tape, Var x, std::size_t t) {
  const Tensor& in = tape.value(x);
  require_rank3(in, "time_slice");
  if (t >= in.extent(0)) throw ShapeError("time_slice: step out of range");
  auto row = in.time_slice(t);
  Tensor v({1, in.extent(1), in.extent(2)}, std::vector<double>(row.begin(), row.end()));
  return tape.record(std::move(v), {x}, [t](const Tensor& up, GradSink& s) {
    if (!s.wants(0)) return;
    auto dst = s.at(0).time_slice(t);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += up[j];
  });
}

Var time_concat(Tape& tape, const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("time_concat: no rows");
  const Tensor& first = tape.value(rows[0]);
  std::vector<double> data;
  for (Var r : rows) {
    const Tensor& v = tape.value(r);
    if (v.shape() != first.shape() || v.extent(0) != 1) {
      throw ShapeError("time_concat: rows must all be [1,B,N] of one shape");
    }
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  const std::size_t width = first.size();
  Tensor v({rows.size(), first.extent(1), first.extent(2)}, std::move(data));
  return tape.record(std::move(v), rows, [n = rows.size(), width](const Tensor& up, GradSink& s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (!s.wants(t)) continue;
      Tensor& g = s.at(t);
      for (std::size_t j = 0; j < width; ++j) g[j] += up[t * width + j];
    }
  });
}

Var spike(Tape& tape, Var h, Var v_th, double alpha) {
  const Tensor& hv = tape.value(h);
  const double th = tape.value(v_th).item();
  Tensor o = heaviside(hv, th, default_pool());
  tape.note_discrete(o);
  Tensor sg = surrogate_grad(hv, th, alpha);
  return tape.record(std::move(o), {h, v_th}, [sg](const Tensor& up, GradSink& s) {
    if (s.wants(0)) {
      Tensor& g = s.at(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * sg[i];
    }
    if (s.wants(1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < sg.size(); ++i) acc += up[i] * sg[i];
      s.at(1)[0] -= acc;
    }
  });
}

Var reset(Tape& tape, Var h, Var o) {
  const Tensor& hv = tape.value(h);
  const Tensor& ov = tape.value(o);
  require_same_shape(hv, ov, "reset");
  Tensor u(hv.shape());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = ov[i] != 0.0 ? NeuronParams::v_r : hv[i];
  return tape.record(std::move(u), {h, o}, [hv, ov](const Tensor& up, GradSink& s) {
    if (s.wants(0)) {
      Tensor& g = s.at(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * (1.0 - ov[i]);
    }
    if (s.wants(1)) {
      Tensor& g = s.at(1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= up[i] * hv[i];
    }
  });
}

NeuronVars mpe_psn(Tape& tape, Var I, Var v_th, const NeuronParams& params, EstimateMode mode,
                   const std::optional<Rng>& rng) {
  params.validate();
  Estimate est = estimate_u_hat(tape.value(I), mode, rng);
  if (mode == EstimateMode::sampled) tape.note_discrete(est.b);
  Tensor keep(est.b.shape());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = 1.0 - est.b[i];
  // Straight-through: b is a constant, so d(u_hat)/dI = 1 - b.
  Var u_hat = mul_const(tape, I, keep);
  Var h = add(tape, scale(tape, shift_time(tape, u_hat), params.tau_m), I);
  Var o = spike(tape, h, v_th, params.alpha);
  Var u = reset(tape, h, o);
  return NeuronVars{o, u, h, u_hat, std::move(est.P), std::move(est.b)};
}

NeuronVars lif(Tape& tape, Var I, Var v_th, const NeuronParams& params) {
  NeuronParams p = params;
  p.v_th = tape.value(v_th).item();
  Membrane m = lif_sequential(tape.value(I), p);
  tape.note_discrete(m.o);
  const std::size_t steps = m.h.extent(0);
  const double tau = p.tau_m, alpha = p.alpha, th = p.v_th;
  Tensor h = m.h, o = m.o;
  Var out = tape.record(m.o, {I, v_th}, [h, o, steps, tau, alpha, th](const Tensor& up,
                                                                        GradSink& s) {
    const std::size_t lanes = h.size() / std::max<std::size_t>(steps, 1);
    Tensor gI(h.shape());
    std::vector<double> grad_u(lanes, 0.0);
    double g_th = 0.0;
    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t row = t * lanes;
      for (std::size_t j = 0; j < lanes; ++j) {
        const std::size_t i = row + j;
        const double sg = surrogate_grad(h[i], th, alpha);
        const double g_fire = up[i] - grad_u[j] * h[i];
        const double g_h = g_fire * sg + grad_u[j] * (1.0 - o[i]);
        gI[i] = g_h;
        g_th -= g_fire * sg;
        grad_u[j] = tau * g_h;
      }
    }
    if (s.wants(0)) accumulate(s.at(0), gI);
    if (s.wants(1)) s.at(1)[0] += g_th;
  });
  return NeuronVars{out, tape.constant(m.u), tape.constant(m.h), std::nullopt, {}, {}};
}

NeuronVars lif_unrolled(Tape& tape, Var I, Var v_th, const NeuronParams& params) {
  params.validate();
  const std::size_t steps = tape.value(I).extent(0);
  std::vector<Var> hs, us, os;
  for (std::size_t t = 0; t < steps; ++t) {
    Var in = time_slice(tape, I, t);
    Var h = t == 0 ? add(tape, scale(tape, tape.constant(Tensor(tape.value(in).shape())),
                                     params.tau_m),
                         in)
                   : add(tape, scale(tape, us.back(), params.tau_m), in);
    Var o = spike(tape, h, v_th, params.alpha);
    hs.push_back(h);
    os.push_back(o);
    us.push_back(reset(tape, h, o));
  }
  return NeuronVars{time_concat(tape, os), time_concat(tape, us), time_concat(tape, hs),
                    std::nullopt, {}, {}};
}

}  // namespace ag

// ---------------------------------------------------------------------------
// Gradient checking and optimisation

GradCheckReport finite_diff_check(ParamRegistry& registry,
                                  const std::function<Var(Tape&)>& build_loss, double step,
                                  double floor) {
  if (!(step > 0.0)) throw ValueError("finite-difference step must be positive");
  registry.zero_grad();
  std::vector<double> base_signature;
  {
    Tape tape(&registry);
    Var loss = build_loss(tape);
    tape.backward(loss);
    base_signature = tape.discrete_signature();
  }
  std::vector<Tensor> analytic;
  for (const auto& p : registry.params()) analytic.push_back(p.grad);
  registry.zero_grad();

  auto evaluate = [&](std::vector<double>& signature) {
    Tape tape(&registry);
    Var loss = build_loss(tape);
    signature = tape.discrete_signature();
    return tape.value(loss).item();
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < registry.size(); ++pi) {
    auto& param = registry[pi];
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double saved = param.value[i];
      std::vector<double> sig_plus, sig_minus;
      param.value[i] = saved + step;
      const double f_plus = evaluate(sig_plus);
      param.value[i] = saved - step;
      const double f_minus = evaluate(sig_minus);
      param.value[i] = saved;
      const std::string label = param.name + "[" + std::to_string(i) + "]";
      if (sig_plus != base_signature || sig_minus != base_signature) {
        report.skipped.push_back(label);
        continue;
      }
      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double g = analytic[pi][i];
      const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
      ++report.checked;
      if (report.worst.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = label;
      }
    }
  }
  return report;
}

void sgd_step(ParamRegistry& registry, double lr, double momentum, double kappa_lr_scale) {
  for (auto& p : registry.params()) {
    const double step = p.kind == ParamRegistry::Kind::kappa ? lr * kappa_lr_scale : lr;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.velocity[i] = momentum * p.velocity[i] + p.grad[i];
      p.value[i] -= step * p.velocity[i];
      p.grad[i] = 0.0;
      if (p.kind == ParamRegistry::Kind::kappa && p.value[i] < 0.0) p.value[i] = 0.0;
    }
  }
}

}  // namespace mpepsn
