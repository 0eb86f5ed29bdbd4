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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "mpepsn/datagen.hpp"
#include "mpepsn/losses.hpp"
#include "mpepsn/network.hpp"
#include "mpepsn/ops.hpp"

using namespace mpepsn;

namespace {

Tensor random_tensor(std::uint64_t seed, Tensor::Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  RngCursor cur{Rng(seed)};
  for (double& v : t.data()) v = cur.uniform(lo, hi);
  return t;
}

ModelConfig small_config(NeuronKind kind = NeuronKind::mpe_psn) {
  ModelConfig c;
  c.inputs = 6;
  c.hidden = {5, 4};
  c.classes = 3;
  c.time_steps = 4;
  c.kind = kind;
  c.init_gain = 2.0;
  return c;
}

}  // namespace

TEST_CASE("synapse forward matches a loop oracle") {
  const Tensor o = random_tensor(1, {3, 2, 4}, 0.0, 1.0);
  const LinearSynapse syn{random_tensor(2, {4, 5}), Tensor::vector({0.1, 0.2, 0.3, 0.4, 0.5})};
  for (int delay : {0, 1}) {
    const Tensor I = synapse_forward(o, syn, delay);
    REQUIRE(I.shape() == Tensor::Shape{3, 2, 5});
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t j = 0; j < 5; ++j) {
          double acc = 0.0;
          if (t >= static_cast<std::size_t>(delay))
            for (std::size_t i = 0; i < 4; ++i) acc += o.at(t - delay, b, i) * syn.weight[i * 5 + j];
          CHECK(I.at(t, b, j) == doctest::Approx(acc + (*syn.bias)[j]).epsilon(1e-14));
        }
  }
  CHECK_THROWS_AS(synapse_forward(o, LinearSynapse{Tensor({3, 5}), std::nullopt}, 0), ShapeError);
}

TEST_CASE("model registers every learnable tensor once") {
  SpikingClassifier model(small_config(), 1);
  const auto& reg = model.params();
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK_NOTHROW(reg.index_of(SpikingClassifier::layer_name(l, "weight")));
    CHECK_NOTHROW(reg.index_of(SpikingClassifier::layer_name(l, "bias")));
    CHECK(model.threshold(l) == 1.0);
    CHECK(model.kappa(l).size() == 4);
  }
  CHECK(reg.size() == 2 * 4 + 2);
  CHECK(model.synapse(0).weight.shape() == Tensor::Shape{6, 5});
  CHECK(model.readout().weight.shape() == Tensor::Shape{4, 3});

  SpikingClassifier lif(small_config(NeuronKind::lif_sequential), 1);
  CHECK(lif.params().size() == 2 * 3 + 2);
  CHECK_THROWS_AS(lif.kappa(0), Error);

  ModelConfig per_neuron = small_config();
  per_neuron.mem.kappa_axis = KappaAxis::neuron;
  SpikingClassifier pn(per_neuron, 1);
  CHECK(pn.kappa(0).size() == 5);
  CHECK(pn.kappa(1).size() == 4);
}

TEST_CASE("model initialisation is seeded") {
  SpikingClassifier a(small_config(), 3), b(small_config(), 3), c(small_config(), 4);
  CHECK(a.synapse(0).weight == b.synapse(0).weight);
  CHECK_FALSE(a.synapse(0).weight == c.synapse(0).weight);
}

TEST_CASE("zero weights give uniform logits and ln K loss") {
  SpikingClassifier model(small_config(), 2);
  for (auto& p : model.params().params())
    if (p.kind == ParamRegistry::Kind::weight) p.value = Tensor(p.value.shape());
  const Tensor x = random_tensor(5, {4, 3, 6});
  const ForwardResult fr = model_forward(x, model, EstimateMode::sampled, Rng(1));
  CHECK(fr.logits == Tensor({4, 3, 3}));
  const std::vector<int> y{0, 1, 2};
  CHECK(cls_loss(fr.logits, y) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(predict(fr.logits) == std::vector<int>{0, 0, 0});
}

TEST_CASE("prediction uses summed logits over time") {
  Tensor logits({2, 2, 2});
  logits.at(0, 0, 1) = 3.0;
  logits.at(1, 0, 0) = 2.0;
  logits.at(0, 1, 0) = -1.0;
  CHECK(predict(logits) == std::vector<int>{1, 1});
}

TEST_CASE("scaling the readout scales logits but keeps predictions") {
  SpikingClassifier model(small_config(), 7);
  const Tensor x = random_tensor(8, {4, 5, 6}, 0.0, 2.0);
  const ForwardResult base = model_forward(x, model, EstimateMode::expectation, std::nullopt);
  auto& w = model.params().get("readout.weight").value;
  auto& b = model.params().get("readout.bias").value;
  for (double& v : w.data()) v *= 2.0;
  for (double& v : b.data()) v *= 2.0;
  const ForwardResult scaled = model_forward(x, model, EstimateMode::expectation, std::nullopt);
  for (std::size_t i = 0; i < base.logits.size(); ++i) {
    CHECK(scaled.logits[i] == doctest::Approx(2.0 * base.logits[i]).epsilon(1e-13));
  }
  CHECK(predict(scaled.logits) == predict(base.logits));
}

TEST_CASE("tape forward equals the plain forward") {
  for (NeuronKind kind : {NeuronKind::mpe_psn, NeuronKind::lif_sequential}) {
    for (int delay : {0, 1}) {
      ModelConfig cfg = small_config(kind);
      cfg.synaptic_delay = delay;
      SpikingClassifier model(cfg, 11);
      const Tensor x = random_tensor(12, {4, 3, 6}, 0.0, 2.0);
      const ForwardResult plain = model_forward(x, model, EstimateMode::sampled, Rng(9));
      Tape tape(&model.params());
      const TapeForward taped =
          model_forward(tape, tape.constant(x), model, EstimateMode::sampled, Rng(9));
      CHECK(tape.value(taped.logits) == plain.logits);
      REQUIRE(taped.traces.size() == plain.layers.size());
      for (std::size_t l = 0; l < plain.layers.size(); ++l) {
        CHECK(taped.traces[l].trace.o == plain.layers[l].trace.o);
        CHECK(taped.traces[l].trace.u == plain.layers[l].trace.u);
      }
    }
  }
}

TEST_CASE("first spiking layer of a parallel model matches the sequential reference at step 0") {
  SpikingClassifier model(small_config(), 13);
  const Tensor x = random_tensor(14, {4, 3, 6}, 0.0, 2.0);
  const ForwardResult fr = model_forward(x, model, EstimateMode::sampled, Rng(2));
  const Tensor I = synapse_forward(x, model.synapse(0), 0);
  const Membrane ref = lif_sequential(I, NeuronParams{});
  auto a = fr.layers[0].trace.u.time_slice(0);
  auto b = ref.u.time_slice(0);
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("spike rate is 100 times the spike mean") {
  const Tensor o({2, 2, 2}, std::vector<double>{1, 0, 0, 0, 1, 1, 0, 1});
  CHECK(spike_rate_percent(o) == 100.0 * 4.0 / 8.0);
  CHECK(spike_rate_percent(Tensor({3, 1, 1})) == 0.0);
  CHECK(spike_rate_percent(Tensor({3, 1, 1}, 1.0)) == 100.0);
}

TEST_CASE("batch diagnostics") {
  LayerTrace lt{NeuronKind::mpe_psn, {}};
  lt.trace.u_hat = Tensor({1, 1, 2}, std::vector<double>{3.0, 0.0});
  lt.trace.u = Tensor({1, 1, 2}, std::vector<double>{0.0, 4.0});
  lt.trace.o = Tensor({1, 1, 2}, std::vector<double>{1.0, 0.0});
  LayerTrace seq{NeuronKind::lif_sequential, {}};
  seq.trace.u = lt.trace.u;
  seq.trace.o = Tensor({1, 1, 2}, 1.0);
  Tensor logits({1, 2, 2});
  logits.at(0, 0, 1) = 1.0;
  logits.at(0, 1, 1) = 1.0;
  const std::vector<int> y{1, 0};
  const BatchDiagnostics d = diagnostics({lt, seq}, logits, y);
  CHECK(d.l2_norm == std::vector<double>{5.0, 0.0});
  CHECK(d.spike_rate == std::vector<double>{50.0, 100.0});
  CHECK(d.correct == 1);
  CHECK(d.accuracy() == 0.5);
}

TEST_CASE("training is deterministic and logs every epoch") {
  DatasetSpec spec;
  spec.samples_per_class = 20;
  spec.seed = 3;
  const auto [train_set, test_set] = generate(spec);
  ModelConfig cfg;
  cfg.hidden = {8};
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;

  std::vector<EpochDiagnostics> seen;
  SpikingClassifier m1(cfg, 5), m2(cfg, 5);
  const auto h1 = train(m1, train_set, test_set, tc, [&](const auto& d) { seen.push_back(d); });
  const auto h2 = train(m2, train_set, test_set, tc);
  CHECK(h1 == h2);
  CHECK(seen == h1);
  REQUIRE(h1.size() == 3);
  CHECK(h1[0].epoch == 1);
  CHECK(h1[2].epoch == 3);
  for (const auto& d : h1) {
    CHECK(d.loss_total == doctest::Approx(total_loss(d.loss_cls, d.loss_mem, 0.01)).epsilon(1e-12));
    for (double r : d.spike_rate) CHECK((r >= 0.0 && r <= 100.0));
  }
  CHECK(training_log_header(1) ==
        "epoch,loss_cls,loss_mem,loss_total,train_acc,test_acc,l2_norm_layer_0,spike_rate_layer_0");
  std::istringstream row(training_log_row(h1[0]));
  std::string first;
  std::getline(row, first, ',');
  CHECK(first == "1");
}

TEST_CASE("switching the membrane loss off leaves only classification") {
  DatasetSpec spec;
  spec.samples_per_class = 10;
  const auto [train_set, test_set] = generate(spec);
  ModelConfig cfg;
  cfg.hidden = {6};
  TrainConfig tc;
  tc.epochs = 2;
  tc.mem_loss = false;
  SpikingClassifier model(cfg, 1);
  for (const auto& d : train(model, train_set, test_set, tc)) {
    CHECK(d.loss_total == d.loss_cls);
    CHECK(d.loss_mem > 0.0);
  }
}

TEST_CASE("divergence is reported") {
  DatasetSpec spec;
  spec.samples_per_class = 10;
  auto [train_set, test_set] = generate(spec);
  ModelConfig cfg;
  cfg.hidden = {6};
  TrainConfig tc;
  tc.epochs = 2;
  SpikingClassifier model(cfg, 1);
  model.params().get("readout.bias").value[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(model, train_set, test_set, tc), DivergenceError);

  SpikingClassifier fresh(cfg, 1);
  train_set.x[5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(fresh, train_set, test_set, tc), ValueError);
}
