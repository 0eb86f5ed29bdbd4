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

#include "mpepsn/network.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mpepsn/ops.hpp"
#include "mpepsn/tensor_io.hpp"

namespace mpepsn {

Tensor synapse_forward(const Tensor& o_prev, const LinearSynapse& syn, int delay) {
  require_rank3(o_prev, "synapse_forward");
  if (delay != 0 && delay != 1) throw ValueError("synaptic delay must be 0 or 1");
  const Tensor& w = syn.weight;
  if (w.rank() != 2 || w.extent(0) != o_prev.extent(2)) {
    throw ShapeError("synapse_forward: weight " + shape_string(w.shape()) +
                     " does not fit input " + shape_string(o_prev.shape()));
  }
  const Tensor in = delay == 1 ? shift_time(o_prev) : o_prev;
  const std::size_t rows = in.extent(0) * in.extent(1);
  const std::size_t nout = w.extent(1);
  Tensor out = matmul(in.reshaped({rows, in.extent(2)}), w);
  if (syn.bias) {
    const Tensor& b = *syn.bias;
    if (b.rank() != 1 || b.extent(0) != nout) {
      throw ShapeError("synapse_forward: bias " + shape_string(b.shape()) + " does not fit " +
                       std::to_string(nout) + " outputs");
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < nout; ++c) out[r * nout + c] += b[c];
  }
  return out.reshaped({in.extent(0), in.extent(1), nout});
}

void ModelConfig::validate() const {
  if (inputs == 0 || classes < 2 || time_steps == 0) {
    throw ValueError("model needs inputs, at least two classes and time steps");
  }
  if (hidden.empty()) throw ValueError("model needs at least one spiking layer");
  for (std::size_t h : hidden) {
    if (h == 0) throw ValueError("spiking layers need at least one neuron");
  }
  if (synaptic_delay != 0 && synaptic_delay != 1) throw ValueError("synaptic delay must be 0 or 1");
  if (!(init_gain > 0.0) || !std::isfinite(init_gain)) throw ValueError("init gain must be positive");
  neuron.validate();
  mem.validate();
}

std::string SpikingClassifier::layer_name(std::size_t layer, const char* field) {
  return "layer" + std::to_string(layer) + "." + field;
}

SpikingClassifier::SpikingClassifier(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  RngCursor init(Rng(seed).split(0));
  auto uniform_weight = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound = config_.init_gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = init.uniform(-bound, bound);
    return w;
  };
  using Kind = ParamRegistry::Kind;
  std::size_t fan_in = config_.inputs;
  for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
    const std::size_t width = config_.hidden[l];
    params_.add(layer_name(l, "weight"), Kind::weight, uniform_weight(fan_in, width));
    params_.add(layer_name(l, "bias"), Kind::bias, Tensor({width}));
    params_.add(layer_name(l, "v_th"), Kind::threshold, Tensor::scalar(config_.neuron.v_th));
    if (config_.kind == NeuronKind::mpe_psn) {
      const std::size_t len =
          config_.mem.kappa_axis == KappaAxis::time ? config_.time_steps : width;
      params_.add(layer_name(l, "kappa"), Kind::kappa, Tensor({len}, config_.mem.kappa_init));
    }
    fan_in = width;
  }
  params_.add("readout.weight", Kind::weight, uniform_weight(fan_in, config_.classes));
  params_.add("readout.bias", Kind::bias, Tensor({config_.classes}));
}

LinearSynapse SpikingClassifier::synapse(std::size_t layer) const {
  return {params_.get(layer_name(layer, "weight")).value,
          params_.get(layer_name(layer, "bias")).value};
}

LinearSynapse SpikingClassifier::readout() const {
  return {params_.get("readout.weight").value, params_.get("readout.bias").value};
}

double SpikingClassifier::threshold(std::size_t layer) const {
  return params_.get(layer_name(layer, "v_th")).value.item();
}

const Tensor& SpikingClassifier::kappa(std::size_t layer) const {
  return params_.get(layer_name(layer, "kappa")).value;
}

ForwardResult model_forward(const Tensor& x, const SpikingClassifier& model, EstimateMode mode,
                            const std::optional<Rng>& rng) {
  const ModelConfig& cfg = model.config();
  if (mode == EstimateMode::sampled && cfg.kind == NeuronKind::mpe_psn && !rng) {
    throw ValueError("model_forward: sampled mode needs a random stream");
  }
  ForwardResult result;
  Tensor spikes = x;
  for (std::size_t l = 0; l < model.spiking_layers(); ++l) {
    Tensor I = synapse_forward(spikes, model.synapse(l), cfg.synaptic_delay);
    NeuronParams p = cfg.neuron;
    p.v_th = model.threshold(l);
    if (cfg.kind == NeuronKind::mpe_psn) {
      std::optional<Rng> layer_rng;
      if (rng) layer_rng = rng->split(l);
      ParallelTrace tr = mpe_psn_forward(I, p, mode, layer_rng);
      spikes = tr.o;
      result.layers.push_back({NeuronKind::mpe_psn, std::move(tr)});
    } else {
      Membrane m = lif_sequential(I, p);
      spikes = m.o;
      result.layers.push_back(
          {NeuronKind::lif_sequential,
           ParallelTrace{std::move(I), {}, {}, {}, std::move(m.h), std::move(m.u), std::move(m.o)}});
    }
  }
  result.logits = synapse_forward(spikes, model.readout(), cfg.synaptic_delay);
  return result;
}

TapeForward model_forward(Tape& tape, Var x, const SpikingClassifier& model, EstimateMode mode,
                          const std::optional<Rng>& rng) {
  const ModelConfig& cfg = model.config();
  if (tape.registry() != &model.params()) {
    throw Error("model_forward: tape must record into the model's parameter registry");
  }
  TapeForward out;
  Var spikes = x;
  for (std::size_t l = 0; l < model.spiking_layers(); ++l) {
    Var w = tape.param(SpikingClassifier::layer_name(l, "weight"));
    Var b = tape.param(SpikingClassifier::layer_name(l, "bias"));
    Var th = tape.param(SpikingClassifier::layer_name(l, "v_th"));
    Var I = ag::linear(tape, spikes, w, b, cfg.synaptic_delay);
    ag::NeuronVars nv;
    if (cfg.kind == NeuronKind::mpe_psn) {
      std::optional<Rng> layer_rng;
      if (rng) layer_rng = rng->split(l);
      nv = ag::mpe_psn(tape, I, th, cfg.neuron, mode, layer_rng);
      out.traces.push_back({NeuronKind::mpe_psn,
                            ParallelTrace{tape.value(I), nv.P, nv.b, tape.value(*nv.u_hat),
                                          tape.value(nv.h), tape.value(nv.u), tape.value(nv.o)}});
    } else {
      nv = ag::lif(tape, I, th, cfg.neuron);
      out.traces.push_back({NeuronKind::lif_sequential,
                            ParallelTrace{tape.value(I), {}, {}, {}, tape.value(nv.h),
                                          tape.value(nv.u), tape.value(nv.o)}});
    }
    spikes = nv.o;
    out.layers.push_back(std::move(nv));
  }
  out.logits = ag::linear(tape, spikes, tape.param("readout.weight"), tape.param("readout.bias"),
                          cfg.synaptic_delay);
  return out;
}

std::vector<int> predict(const Tensor& logits) {
  require_rank3(logits, "predict");
  const std::size_t T = logits.extent(0), B = logits.extent(1), K = logits.extent(2);
  std::vector<int> out(B);
  std::vector<double> avg(K);
  for (std::size_t b = 0; b < B; ++b) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) avg[k] += logits.at(t, b, k);
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (avg[k] > avg[best]) best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

double estimation_l2(const Tensor& u_hat, const Tensor& u) {
  return std::sqrt(sum(estimation_error(u_hat, u)));
}

double spike_rate_percent(const Tensor& o) {
  if (o.empty()) return 0.0;
  return 100.0 * mean(o);
}

BatchDiagnostics diagnostics(const std::vector<LayerTrace>& traces, const Tensor& logits,
                             std::span<const int> labels) {
  BatchDiagnostics d;
  for (const auto& lt : traces) {
    // Sequential layers have no estimate to compare against.
    d.l2_norm.push_back(lt.kind == NeuronKind::mpe_psn ? estimation_l2(lt.trace.u_hat, lt.trace.u)
                                                       : 0.0);
    d.spike_rate.push_back(spike_rate_percent(lt.trace.o));
  }
  auto pred = predict(logits);
  if (labels.size() != pred.size()) throw ShapeError("diagnostics: label count differs from batch");
  d.count = pred.size();
  for (std::size_t i = 0; i < pred.size(); ++i) d.correct += pred[i] == labels[i] ? 1 : 0;
  return d;
}

std::vector<EpochDiagnostics> train(SpikingClassifier& model, const LabeledBatch& train_set,
                                    const LabeledBatch& test_set, const TrainConfig& config,
                                    const std::function<void(const EpochDiagnostics&)>& on_epoch) {
  const ModelConfig& mc = model.config();
  if (config.batch_size == 0) throw ValueError("batch size must be positive");
  for (const LabeledBatch* set : {&train_set, &test_set}) {
    require_rank3(set->x, "train");
    if (set->x.extent(2) != mc.inputs || set->x.extent(0) != mc.time_steps) {
      throw ShapeError("dataset " + shape_string(set->x.shape()) + " does not match model (T=" +
                       std::to_string(mc.time_steps) + ", inputs=" + std::to_string(mc.inputs) +
                       ")");
    }
  }
  if (train_set.size() == 0) throw ValueError("empty training set");
  if (!all_finite(train_set.x) || !all_finite(test_set.x)) {
    throw ValueError("dataset contains non-finite inputs");
  }
  const double lambda = config.mem_loss ? mc.mem.lambda : 0.0;
  const Rng root(config.seed);
  ParamRegistry& params = model.params();

  std::vector<EpochDiagnostics> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngCursor shuffle_rng(root.split(1).split(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    EpochDiagnostics row;
    row.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++steps) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      LabeledBatch batch =
          train_set.gather(std::vector<std::size_t>(order.begin() + start, order.begin() + stop));

      Tape tape(&params);
      TapeForward fwd = model_forward(tape, tape.constant(batch.x), model, config.mode,
                                      root.split(2).split(epoch).split(steps));
      Var l_cls = ag::cls_loss(tape, fwd.logits, batch.y);
      std::optional<Var> l_mem;
      for (std::size_t l = 0; l < fwd.layers.size(); ++l) {
        if (!fwd.layers[l].u_hat) continue;
        Var term = ag::mem_loss(tape, *fwd.layers[l].u_hat, tape.value(fwd.layers[l].u),
                                tape.param(SpikingClassifier::layer_name(l, "kappa")),
                                mc.mem.kappa_axis);
        l_mem = l_mem ? ag::add(tape, *l_mem, term) : term;
      }
      if (!l_mem) l_mem = tape.constant(Tensor::scalar(0.0));
      Var total = ag::total_loss(tape, l_cls, *l_mem, lambda);

      const double vc = tape.value(l_cls).item();
      const double vm = tape.value(*l_mem).item();
      const double vt = tape.value(total).item();
      if (!std::isfinite(vc) || !std::isfinite(vm) || !std::isfinite(vt)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(steps));
      }
      row.loss_cls += vc;
      row.loss_mem += vm;
      row.loss_total += vt;
      tape.backward(total);
      sgd_step(params, config.lr, config.momentum, config.kappa_lr_scale);
      for (const auto& p : params.params()) {
        if (!all_finite(p.value)) {
          throw DivergenceError("non-finite parameter " + p.name + " at epoch " +
                                std::to_string(epoch) + ", step " + std::to_string(steps));
        }
      }
    }
    row.loss_cls /= static_cast<double>(steps);
    row.loss_mem /= static_cast<double>(steps);
    row.loss_total /= static_cast<double>(steps);

    ForwardResult on_train = model_forward(train_set.x, model, config.mode, root.split(3).split(epoch));
    BatchDiagnostics dt = diagnostics(on_train.layers, on_train.logits, train_set.y);
    row.train_acc = dt.accuracy();
    row.l2_norm = std::move(dt.l2_norm);
    row.spike_rate = std::move(dt.spike_rate);
    if (test_set.size() > 0) {
      ForwardResult on_test =
          model_forward(test_set.x, model, config.mode, root.split(4).split(epoch));
      row.test_acc = diagnostics(on_test.layers, on_test.logits, test_set.y).accuracy();
    }
    history.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return history;
}

std::string training_log_header(std::size_t layers) {
  std::string h = "epoch,loss_cls,loss_mem,loss_total,train_acc,test_acc";
  for (std::size_t l = 0; l < layers; ++l) h += ",l2_norm_layer_" + std::to_string(l);
  for (std::size_t l = 0; l < layers; ++l) h += ",spike_rate_layer_" + std::to_string(l);
  return h;
}

std::string training_log_row(const EpochDiagnostics& d) {
  std::ostringstream out;
  out << d.epoch << ',' << format_real(d.loss_cls) << ',' << format_real(d.loss_mem) << ','
      << format_real(d.loss_total) << ',' << format_real(d.train_acc) << ','
      << format_real(d.test_acc);
  for (double v : d.l2_norm) out << ',' << format_real(v);
  for (double v : d.spike_rate) out << ',' << format_real(v);
  return out.str();
}

}  // namespace mpepsn
