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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpepsn/autograd.hpp"
#include "mpepsn/datagen.hpp"
#include "mpepsn/losses.hpp"
#include "mpepsn/neuron.hpp"

namespace mpepsn {

enum class NeuronKind { mpe_psn, lif_sequential };

/// Fully connected synapse: I_t = o_t W + bias.
struct LinearSynapse {
  /// [N_prev, N].
  Tensor weight;
  /// [N], optional.
  std::optional<Tensor> bias;
};

/// Synaptic current for every step. delay 0 couples o_t to I_t; delay 1
/// couples o_{t-1} to I_t with a silent step before t = 0.
Tensor synapse_forward(const Tensor& o_prev, const LinearSynapse& syn, int delay);

struct ModelConfig {
  std::size_t inputs = 16;
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t classes = 2;
  /// Needed up front when kappa is indexed by time.
  std::size_t time_steps = 8;
  NeuronKind kind = NeuronKind::mpe_psn;
  int synaptic_delay = 0;
  /// Weights start U(-a, a) with a = init_gain * sqrt(3 / fan_in), i.e. a
  /// standard deviation of init_gain / sqrt(fan_in).
  double init_gain = 1.0;
  NeuronParams neuron;
  MemLossConfig mem;

  void validate() const;
};

/// Stack of (synapse, spiking neuron) layers followed by a linear readout
/// that emits logits at every step. Parameters live in an owned registry:
///   layer<i>.weight, layer<i>.bias, layer<i>.v_th, layer<i>.kappa (parallel
///   layers only), readout.weight, readout.bias.
class SpikingClassifier {
 public:
  /// Weights uniform with std init_gain / sqrt(fan_in), biases 0, thresholds
  /// and kappa from the config.
  SpikingClassifier(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParamRegistry& params() noexcept { return params_; }
  const ParamRegistry& params() const noexcept { return params_; }

  std::size_t spiking_layers() const noexcept { return config_.hidden.size(); }
  LinearSynapse synapse(std::size_t layer) const;
  LinearSynapse readout() const;
  double threshold(std::size_t layer) const;
  /// Kappa of a parallel layer.
  const Tensor& kappa(std::size_t layer) const;

  static std::string layer_name(std::size_t layer, const char* field);

 private:
  ModelConfig config_;
  ParamRegistry params_;
};

/// One spiking layer's forward record. For sequential LIF layers P, b and
/// u_hat are empty.
struct LayerTrace {
  NeuronKind kind;
  ParallelTrace trace;
};

struct ForwardResult {
  Tensor logits;
  std::vector<LayerTrace> layers;
};

/// Inference pass without a tape. Layer l samples with rng->split(l).
ForwardResult model_forward(const Tensor& x, const SpikingClassifier& model, EstimateMode mode,
                            const std::optional<Rng>& rng);

struct TapeForward {
  Var logits;
  std::vector<ag::NeuronVars> layers;
  std::vector<LayerTrace> traces;
};

/// Same pass recorded on `tape`, whose registry must be model.params().
TapeForward model_forward(Tape& tape, Var x, const SpikingClassifier& model, EstimateMode mode,
                          const std::optional<Rng>& rng);

/// argmax over classes of the time-averaged logits; ties go to the lower class.
std::vector<int> predict(const Tensor& logits);

/// Per-layer estimate quality and activity of one forward pass.
struct BatchDiagnostics {
  /// ||u_hat - u||_2 over all elements; 0 for sequential layers.
  std::vector<double> l2_norm;
  /// 100 * mean(o).
  std::vector<double> spike_rate;
  std::size_t correct = 0;
  std::size_t count = 0;

  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

double estimation_l2(const Tensor& u_hat, const Tensor& u);
double spike_rate_percent(const Tensor& o);

BatchDiagnostics diagnostics(const std::vector<LayerTrace>& traces, const Tensor& logits,
                             std::span<const int> labels);

struct EpochDiagnostics {
  std::size_t epoch = 0;
  double loss_cls = 0.0;
  double loss_mem = 0.0;
  double loss_total = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::vector<double> l2_norm;
  std::vector<double> spike_rate;

  friend bool operator==(const EpochDiagnostics&, const EpochDiagnostics&) = default;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  /// Kappa learns at lr * kappa_lr_scale.
  double kappa_lr_scale = 1.0;
  EstimateMode mode = EstimateMode::sampled;
  /// When false lambda is forced to 0; L_mem is still computed and reported.
  bool mem_loss = true;
  std::uint64_t seed = 42;
};

/// Minibatch STBP training: forward on a tape, total loss, backward, SGD.
/// After every epoch the whole training and test sets are evaluated to fill
/// the diagnostics row, which is also handed to `on_epoch` if set. Throws
/// DivergenceError on a non-finite loss or parameter; ValueError on non-finite inputs.
std::vector<EpochDiagnostics> train(
    SpikingClassifier& model, const LabeledBatch& train_set, const LabeledBatch& test_set,
    const TrainConfig& config,
    const std::function<void(const EpochDiagnostics&)>& on_epoch = nullptr);

/// Training log CSV header for `layers` spiking layers.
std::string training_log_header(std::size_t layers);
std::string training_log_row(const EpochDiagnostics& d);

}  // namespace mpepsn
