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

#include "mpepsn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mpepsn/autograd.hpp"
#include "mpepsn/losses.hpp"
#include "mpepsn/neuron.hpp"
#include "mpepsn/ops.hpp"
#include "mpepsn/tensor_io.hpp"

namespace mpepsn {

namespace {

NeuronParams params_of(const VerifyConfig& cfg) {
  NeuronParams p;
  p.tau_m = cfg.tau_m;
  p.v_th = cfg.v_th;
  p.alpha = cfg.alpha;
  p.validate();
  return p;
}

void require_trials(std::size_t n, const char* what) {
  if (n == 0) throw ValueError(std::string(what) + " must be at least 1");
}

Tensor trial_input(std::uint64_t seed, std::size_t index) {
  TrialShape s = trial_shape(seed, index);
  Tensor x({s.T, s.B, s.N});
  const Rng rng = Rng(seed).split(index).split(1);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -2.0 + 4.0 * rng.uniform(i);
  return x;
}

std::string case_label(std::uint64_t seed, std::size_t index, const Tensor& x) {
  return "seed=" + std::to_string(seed) + " trial=" + std::to_string(index) +
         " shape=" + shape_string(x.shape());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

void record(CheckResult& r, bool ok, double err, const std::string& label) {
  ++r.trials;
  r.max_error = std::max(r.max_error, err);
  if (!ok) {
    if (r.failures == 0) r.detail = label;
    ++r.failures;
  }
}

// Parallel pass with the step-0 history taken from the estimate instead of zero.
Membrane faulty_parallel(const Tensor& I, const NeuronParams& p, const Rng& rng) {
  Estimate est = estimate_u_hat(I, EstimateMode::sampled, rng);
  Tensor history = shift_time(est.u_hat);
  auto first = est.u_hat.time_slice(0);
  std::copy(first.begin(), first.end(), history.time_slice(0).begin());
  return parallel_update(I, history, p);
}

}  // namespace

TrialShape trial_shape(std::uint64_t seed, std::size_t index) {
  RngCursor cur(Rng(seed).split(index).split(0));
  TrialShape s;
  s.T = 1 + cur.below(8);
  s.B = 1 + cur.below(4);
  s.N = 1 + cur.below(64);
  return s;
}

CheckResult check_t0_exactness(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  const NeuronParams p = params_of(cfg);
  CheckResult r;
  r.name = "t0_exactness";
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const Tensor I = trial_input(cfg.seed, i);
    const Membrane ref = lif_sequential(I, p);
    const Rng rng = Rng(cfg.seed).split(i).split(2);
    for (EstimateMode mode : {EstimateMode::sampled, EstimateMode::expectation}) {
      Tensor u, o;
      if (cfg.inject_shift_fault) {
        Membrane m = faulty_parallel(I, p, rng);
        u = std::move(m.u);
        o = std::move(m.o);
      } else {
        ParallelTrace tr = mpe_psn_forward(I, p, mode, rng);
        u = std::move(tr.u);
        o = std::move(tr.o);
      }
      const bool ok = same_bits(u.time_slice(0), ref.u.time_slice(0)) &&
                      same_bits(o.time_slice(0), ref.o.time_slice(0));
      record(r, ok, max_abs_diff(u.time_slice(0), ref.u.time_slice(0)),
             case_label(cfg.seed, i, I));
    }
  }
  return r;
}

CheckResult check_teacher_forced(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  const NeuronParams p = params_of(cfg);
  CheckResult r;
  r.name = "teacher_forced_equivalence";
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const Tensor I = trial_input(cfg.seed, i);
    const Membrane ref = lif_sequential(I, p);
    const Membrane tf = teacher_forced_forward(I, ref.u, p);
    const bool ok = tf.u == ref.u && tf.o == ref.o && tf.h == ref.h;
    record(r, ok, max_abs_diff(tf.u.data(), ref.u.data()), case_label(cfg.seed, i, I));
  }
  return r;
}

CheckResult check_reset_law(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  const NeuronParams p = params_of(cfg);
  CheckResult r;
  r.name = "reset_law_and_binary_spikes";
  auto lawful = [&](const Tensor& h, const Tensor& u, const Tensor& o) {
    for (std::size_t j = 0; j < o.size(); ++j) {
      if (o[j] != 0.0 && o[j] != 1.0) return false;
      if (o[j] == 1.0 && (u[j] != 0.0 || h[j] < p.v_th)) return false;
      if (o[j] == 0.0 && (u[j] != h[j] || h[j] >= p.v_th)) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const Tensor I = trial_input(cfg.seed, i);
    const Membrane seq = lif_sequential(I, p);
    const ParallelTrace par = mpe_psn_forward(I, p, EstimateMode::sampled,
                                              Rng(cfg.seed).split(i).split(2));
    bool ok = lawful(seq.h, seq.u, seq.o) && lawful(par.h, par.u, par.o);
    for (double b : par.b.data()) ok = ok && (b == 0.0 || b == 1.0);
    record(r, ok, 0.0, case_label(cfg.seed, i, I));
  }
  return r;
}

CheckResult check_worker_determinism(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  const NeuronParams p = params_of(cfg);
  CheckResult r;
  r.name = "worker_count_determinism";
  WorkerPool one(1), three(3);
  // Large enough that the pool actually splits the work.
  const std::size_t cases = std::min<std::size_t>(cfg.trials, 8);
  for (std::size_t i = 0; i < cases; ++i) {
    Tensor I({8, 4, 2048});
    const Rng in_rng = Rng(cfg.seed).split(i).split(3);
    for (std::size_t j = 0; j < I.size(); ++j) I[j] = -2.0 + 4.0 * in_rng.uniform(j);
    const Rng rng = Rng(cfg.seed).split(i).split(2);
    const ParallelTrace a = mpe_psn_forward(I, p, EstimateMode::sampled, rng, one);
    const ParallelTrace b = mpe_psn_forward(I, p, EstimateMode::sampled, rng, three);
    const bool ok = a.b == b.b && a.u_hat == b.u_hat && a.u == b.u && a.o == b.o;
    record(r, ok, max_abs_diff(a.u.data(), b.u.data()), case_label(cfg.seed, i, I));
  }
  return r;
}

namespace {

Tensor random_tensor(RngCursor& cur, Tensor::Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = cur.uniform(lo, hi);
  return t;
}

}  // namespace

CheckResult check_smooth_gradients(const VerifyConfig& cfg) {
  require_trials(cfg.grad_graphs, "gradient graph count");
  CheckResult r;
  r.name = "smooth_gradients_vs_finite_differences";
  constexpr double kStep = 1e-5;
  constexpr double kTolerance = 1e-4;
  for (std::size_t g = 0; g < cfg.grad_graphs; ++g) {
    RngCursor cur(Rng(cfg.seed).split(1u << 16).split(g));
    const std::size_t variant = g % 4;
    const std::size_t T = 1 + cur.below(3), B = 1 + cur.below(3), nin = 1 + cur.below(4),
                      nout = 2 + cur.below(3);
    ParamRegistry reg;
    reg.add("w", ParamRegistry::Kind::weight, random_tensor(cur, {nin, nout}, -1.0, 1.0));
    reg.add("bias", ParamRegistry::Kind::bias, random_tensor(cur, {nout}, -0.5, 0.5));
    reg.add("w2", ParamRegistry::Kind::weight, random_tensor(cur, {nout, nout}, -1.0, 1.0));
    reg.add("kappa", ParamRegistry::Kind::kappa,
            random_tensor(cur, {variant == 3 ? nout : T}, 0.1, 2.0));
    const Tensor x = random_tensor(cur, {T, B, nin}, -2.0, 2.0);
    const Tensor target = random_tensor(cur, {T, B, nout}, -1.0, 1.0);
    std::vector<int> labels(B);
    for (int& y : labels) y = static_cast<int>(cur.below(nout));
    const Tensor keep = random_tensor(cur, {T, B, nout}, 0.0, 1.0);

    auto build = [&](Tape& tape) -> Var {
      Var in = tape.constant(x);
      Var w = tape.param("w");
      switch (variant) {
        case 0: {  // matmul -> sigmoid -> MSE
          Var z = ag::matmul(tape, tape.constant(x.reshaped({T * B, nin})), w);
          Var diff = ag::sub(tape, ag::sigmoid(tape, z),
                             tape.constant(target.reshaped({T * B, nout})));
          return ag::mean(tape, ag::square(tape, diff));
        }
        case 1: {  // two synapses with delay, sigmoid between, cross-entropy
          Var h = ag::sigmoid(tape, ag::linear(tape, in, w, tape.param("bias"), 1));
          Var logits = ag::linear(tape, h, tape.param("w2"), std::nullopt, 0);
          return ag::cls_loss(tape, logits, labels);
        }
        case 2: {  // straight-through estimate path and time-weighted membrane loss
          Var I = ag::linear(tape, in, w, tape.param("bias"), 0);
          Var u_hat = ag::mul_const(tape, I, keep);
          Var hist = ag::add(tape, ag::scale(tape, ag::shift_time(tape, u_hat), cfg.tau_m), I);
          Var mem = ag::mem_loss(tape, ag::sigmoid(tape, hist), target, tape.param("kappa"),
                                 KappaAxis::time);
          Var cls = ag::cls_loss(tape, ag::linear(tape, ag::sigmoid(tape, I), tape.param("w2"),
                                                  std::nullopt, 0),
                                 labels);
          return ag::total_loss(tape, cls, mem, 0.3);
        }
        default: {  // neuron-indexed kappa, elementwise product, slicing
          Var I = ag::linear(tape, in, w, tape.param("bias"), 0);
          Var s = ag::sigmoid(tape, I);
          std::vector<Var> rows;
          for (std::size_t t = 0; t < T; ++t) rows.push_back(ag::time_slice(tape, s, T - 1 - t));
          Var rev = ag::time_concat(tape, rows);
          Var prod = ag::mul(tape, rev, ag::sigmoid(tape, ag::linear(tape, s, tape.param("w2"),
                                                                    std::nullopt, 0)));
          return ag::add(tape, ag::mem_loss(tape, prod, target, tape.param("kappa"),
                                            KappaAxis::neuron),
                         ag::sum(tape, ag::scale(tape, prod, 0.1)));
        }
      }
    };
    GradCheckReport rep = finite_diff_check(reg, build, kStep);
    const bool ok = rep.max_rel_error < kTolerance && rep.skipped.empty() && rep.checked > 0;
    record(r, ok, rep.max_rel_error,
           "seed=" + std::to_string(cfg.seed) + " graph=" + std::to_string(g) +
               " variant=" + std::to_string(variant) + " worst=" + rep.worst);
  }
  return r;
}

CheckResult check_surrogate_chain(const VerifyConfig& cfg) {
  CheckResult r;
  r.name = "surrogate_chain_hand_value";
  // L = o, o = H(w x - v_th), x = 1, w = 1.2, v_th = 1, alpha = 1.
  ParamRegistry reg;
  reg.add("w", ParamRegistry::Kind::weight, Tensor::scalar(1.2));
  reg.add("v_th", ParamRegistry::Kind::threshold, Tensor::scalar(1.0));
  Tape tape(&reg);
  Var h = ag::mul(tape, tape.param("w"), tape.constant(Tensor::scalar(1.0)));
  Var o = ag::spike(tape, h, tape.param("v_th"), cfg.alpha);
  tape.backward(ag::sum(tape, o));
  const double got = reg.get("w").grad.item();
  const double expected = 0.8;
  record(r, got == expected, std::abs(got - expected), "dL/dw=" + format_real(got));
  const double got_th = reg.get("v_th").grad.item();
  record(r, got_th == -expected, std::abs(got_th + expected), "dL/dv_th=" + format_real(got_th));
  return r;
}

CheckResult check_lif_bptt(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  const NeuronParams p = params_of(cfg);
  CheckResult r;
  r.name = "lif_bptt_fused_vs_unrolled";
  const std::size_t cases = std::min<std::size_t>(cfg.trials, 50);
  for (std::size_t i = 0; i < cases; ++i) {
    const Tensor I = trial_input(cfg.seed, i);
    RngCursor wcur(Rng(cfg.seed).split(i).split(3));
    const Tensor weights = random_tensor(wcur, I.shape(), -1.0, 1.0);
    auto run = [&](bool fused, Tensor& grad_in, double& grad_th, Tensor& spikes) {
      ParamRegistry reg;
      reg.add("v_th", ParamRegistry::Kind::threshold, Tensor::scalar(p.v_th));
      Tape tape(&reg);
      Var in = tape.leaf(I);
      Var th = tape.param("v_th");
      ag::NeuronVars nv = fused ? ag::lif(tape, in, th, p) : ag::lif_unrolled(tape, in, th, p);
      tape.backward(ag::sum(tape, ag::mul_const(tape, nv.o, weights)));
      grad_in = tape.grad(in);
      grad_th = reg.get("v_th").grad.item();
      spikes = tape.value(nv.o);
    };
    Tensor g_fused, g_unrolled, o_fused, o_unrolled;
    double th_fused = 0.0, th_unrolled = 0.0;
    run(true, g_fused, th_fused, o_fused);
    run(false, g_unrolled, th_unrolled, o_unrolled);
    double err = 0.0;
    for (std::size_t j = 0; j < g_fused.size(); ++j) {
      err = std::max(err, std::abs(g_fused[j] - g_unrolled[j]) /
                              std::max(1.0, std::abs(g_unrolled[j])));
    }
    err = std::max(err, std::abs(th_fused - th_unrolled) / std::max(1.0, std::abs(th_unrolled)));
    record(r, o_fused == o_unrolled && err < 1e-12, err, case_label(cfg.seed, i, I));
  }
  return r;
}

std::vector<CheckResult> run_verification(const VerifyConfig& cfg) {
  require_trials(cfg.trials, "trials");
  require_trials(cfg.grad_graphs, "gradient graph count");
  return {check_t0_exactness(cfg),      check_teacher_forced(cfg),   check_reset_law(cfg),
          check_worker_determinism(cfg), check_smooth_gradients(cfg), check_surrogate_chain(cfg),
          check_lif_bptt(cfg)};
}

std::string verification_csv(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  out << "check,trials,failures,max_error,status,detail\n";
  for (const auto& r : results) {
    out << r.name << ',' << r.trials << ',' << r.failures << ',' << format_real(r.max_error) << ','
        << (r.passed() ? "pass" : "FAIL") << ",\"" << r.detail << "\"\n";
  }
  return out.str();
}

std::string verification_text(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << (r.passed() ? "[pass] " : "[FAIL] ") << r.name << "  trials=" << r.trials
        << " failures=" << r.failures << " max_error=" << format_real(r.max_error);
    if (!r.passed()) out << "  first failure: " << r.detail;
    out << '\n';
    failed += r.passed() ? 0 : 1;
  }
  out << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << '\n';
  return out.str();
}

}  // namespace mpepsn
