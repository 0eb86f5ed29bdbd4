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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mpepsn/losses.hpp"
#include "mpepsn/ops.hpp"

using namespace mpepsn;

namespace {

Tensor random_tensor(std::uint64_t seed, Tensor::Shape shape) {
  Tensor t(std::move(shape));
  RngCursor cur{Rng(seed)};
  for (double& v : t.data()) v = cur.uniform(-2.0, 2.0);
  return t;
}

double oracle_mem_loss(const Tensor& a, const Tensor& b, const std::vector<double>& kappa,
                       bool per_time) {
  const std::size_t T = a.extent(0), B = a.extent(1), N = a.extent(2);
  std::vector<double> acc(kappa.size(), 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t n = 0; n < N; ++n) {
        const double d = a.at(t, i, n) - b.at(t, i, n);
        acc[per_time ? t : n] += d * d;
      }
  const double count = per_time ? static_cast<double>(B * N) : static_cast<double>(T * B);
  double loss = 0.0;
  for (std::size_t k = 0; k < kappa.size(); ++k) loss += kappa[k] * acc[k] / count;
  return loss;
}

double oracle_cls_loss(const Tensor& logits, const std::vector<int>& y) {
  const std::size_t T = logits.extent(0), B = logits.extent(1), K = logits.extent(2);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double step = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < K; ++k) z += std::exp(logits.at(t, i, k));
      step += std::log(z) - logits.at(t, i, static_cast<std::size_t>(y[i]));
    }
    total += step / static_cast<double>(B);
  }
  return total / static_cast<double>(T);
}

}  // namespace

TEST_CASE("membrane loss worked examples") {
  const Tensor one({1, 1, 1}, 0.5);
  CHECK(mem_loss(one, Tensor({1, 1, 1}), Tensor::vector({1.0}), KappaAxis::time) == 0.25);
  const Tensor u = random_tensor(1, {2, 3, 4});
  CHECK(mem_loss(u, u, Tensor::vector({1.0, 1.0}), KappaAxis::time) == 0.0);

  const Tensor a = random_tensor(2, {2, 3, 4});
  const double m0 = oracle_mem_loss(a, u, {1.0, 0.0}, true);
  CHECK(mem_loss(a, u, Tensor::vector({2.0, 0.0}), KappaAxis::time) ==
        doctest::Approx(2.0 * m0).epsilon(1e-14));
}

TEST_CASE("membrane loss matches the loop oracle on both axes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor a = random_tensor(seed, {5, 3, 7});
    const Tensor b = random_tensor(seed + 100, {5, 3, 7});
    const std::vector<double> kt{0.1, 2.0, 0.0, 1.0, 0.7};
    std::vector<double> kn(7);
    std::iota(kn.begin(), kn.end(), 0.5);
    CHECK(mem_loss(a, b, Tensor({5}, kt), KappaAxis::time) ==
          doctest::Approx(oracle_mem_loss(a, b, kt, true)).epsilon(1e-13));
    CHECK(mem_loss(a, b, Tensor({7}, kn), KappaAxis::neuron) ==
          doctest::Approx(oracle_mem_loss(a, b, kn, false)).epsilon(1e-13));
  }
}

TEST_CASE("membrane loss is non-negative and zero only at equality") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = random_tensor(seed, {3, 2, 4});
    const Tensor b = random_tensor(seed + 7, {3, 2, 4});
    const Tensor kappa = Tensor::vector({0.5, 1.0, 2.0});
    CHECK(mem_loss(a, b, kappa, KappaAxis::time) > 0.0);
    CHECK(mem_loss(a, a, kappa, KappaAxis::time) == 0.0);
  }
}

TEST_CASE("membrane loss is invariant to permuting batch and neurons") {
  const Tensor a = random_tensor(3, {4, 3, 5});
  const Tensor b = random_tensor(4, {4, 3, 5});
  const std::vector<std::size_t> pb{2, 0, 1}, pn{4, 1, 3, 0, 2};
  Tensor pa(a.shape()), pbt(b.shape());
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t n = 0; n < 5; ++n) {
        pa.at(t, i, n) = a.at(t, pb[i], pn[n]);
        pbt.at(t, i, n) = b.at(t, pb[i], pn[n]);
      }
  const Tensor kappa = Tensor::vector({1.0, 0.3, 2.0, 0.9});
  CHECK(mem_loss(pa, pbt, kappa, KappaAxis::time) ==
        doctest::Approx(mem_loss(a, b, kappa, KappaAxis::time)).epsilon(1e-14));
}

TEST_CASE("membrane loss rejects mismatched kappa") {
  const Tensor a({3, 2, 4});
  CHECK_THROWS_AS(mem_loss(a, a, Tensor::vector({1.0, 1.0}), KappaAxis::time), ShapeError);
  CHECK_THROWS_AS(mem_loss(a, a, Tensor::vector({1.0, 1.0, 1.0}), KappaAxis::neuron), ShapeError);
  CHECK_THROWS_AS(mem_loss(a, Tensor({3, 2, 5}), Tensor::vector({1, 1, 1}), KappaAxis::time),
                  ShapeError);
  MemLossConfig cfg;
  CHECK(cfg.kappa_length({3, 2, 4}) == 3);
  cfg.kappa_axis = KappaAxis::neuron;
  CHECK(cfg.kappa_length({3, 2, 4}) == 4);
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
}

TEST_CASE("classification loss worked examples") {
  const std::vector<int> y{0, 1, 1};
  CHECK(cls_loss(Tensor({4, 3, 2}), y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cls_loss(Tensor({1, 3, 5}), y) == doctest::Approx(std::log(5.0)).epsilon(1e-15));

  Tensor confident({2, 3, 2});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 3; ++i) confident.at(t, i, static_cast<std::size_t>(y[i])) = 50.0;
  CHECK(cls_loss(confident, y) < 1e-15);

  // Constant across time equals the single-step value.
  const Tensor step = random_tensor(9, {1, 3, 2});
  Tensor repeated({6, 3, 2});
  for (std::size_t t = 0; t < 6; ++t)
    std::copy(step.data().begin(), step.data().end(), repeated.time_slice(t).begin());
  CHECK(cls_loss(repeated, y) == doctest::Approx(cls_loss(step, y)).epsilon(1e-14));
}

TEST_CASE("classification loss matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor logits = random_tensor(seed, {3, 4, 3});
    const std::vector<int> y{0, 2, 1, 2};
    CHECK(cls_loss(logits, y) == doctest::Approx(oracle_cls_loss(logits, y)).epsilon(1e-13));
    CHECK(cls_loss(logits, y) >= 0.0);
  }
}

TEST_CASE("classification loss decreases as the correct logit rises") {
  Tensor logits = random_tensor(5, {2, 1, 3});
  const std::vector<int> y{1};
  double prev = cls_loss(logits, y);
  for (int i = 0; i < 10; ++i) {
    logits.at(0, 0, 1) += 0.5;
    const double now = cls_loss(logits, y);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("classification loss rejects bad labels") {
  CHECK_THROWS_AS(cls_loss(Tensor({2, 2, 2}), std::vector<int>{0, 2}), ValueError);
  CHECK_THROWS_AS(cls_loss(Tensor({2, 2, 2}), std::vector<int>{0, -1}), ValueError);
  CHECK_THROWS_AS(cls_loss(Tensor({2, 2, 1}), std::vector<int>{0, 0}), ValueError);
  CHECK_THROWS_AS(cls_loss(Tensor({2, 2, 2}), std::vector<int>{0}), ShapeError);
}

TEST_CASE("total loss weighting") {
  CHECK(total_loss(1.0, 2.0, 0.01) == doctest::Approx(1.01).epsilon(1e-15));
  CHECK(total_loss(0.7, 123.0, 0.0) == 0.7);
  CHECK(total_loss(0.7, 123.0, 1.0) == 123.0);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, -0.1), ValueError);
  // Linear in both arguments.
  const double lam = 0.3;
  CHECK(total_loss(2.0, 4.0, lam) ==
        doctest::Approx(total_loss(1.0, 1.0, lam) + total_loss(1.0, 3.0, lam)).epsilon(1e-15));
}

TEST_CASE("taped losses agree with the plain ones and detach the target") {
  const Tensor uh = random_tensor(1, {3, 2, 4});
  const Tensor target = random_tensor(2, {3, 2, 4});
  const Tensor kappa = Tensor::vector({1.0, 0.5, 2.0});
  const std::vector<int> y{1, 0};
  const Tensor logits = random_tensor(3, {3, 2, 2});

  Tape tape;
  Var vu = tape.leaf(uh);
  Var vk = tape.leaf(kappa);
  Var mem = ag::mem_loss(tape, vu, target, vk, KappaAxis::time);
  Var cls = ag::cls_loss(tape, tape.leaf(logits), y);
  CHECK(tape.value(mem).item() == mem_loss(uh, target, kappa, KappaAxis::time));
  CHECK(tape.value(cls).item() == cls_loss(logits, y));
  Var total = ag::total_loss(tape, cls, mem, 0.25);
  CHECK(tape.value(total).item() ==
        total_loss(tape.value(cls).item(), tape.value(mem).item(), 0.25));
  tape.backward(total);

  // d/dkappa_t = lambda * per-step MSE; d/du_hat = lambda * 2 kappa_t (u_hat - u) / (B N).
  const Tensor gk = tape.grad(vk);
  const Tensor gu = tape.grad(vu);
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> k1(3, 0.0);
    k1[t] = 1.0;
    CHECK(gk[t] == doctest::Approx(0.25 * oracle_mem_loss(uh, target, k1, true)).epsilon(1e-13));
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t f = t * 8 + i;
      CHECK(gu[f] == doctest::Approx(0.25 * 2.0 * kappa[t] * (uh[f] - target[f]) / 8.0)
                         .epsilon(1e-13));
    }
  }
}

TEST_CASE("degenerate lambda leaves exactly one loss") {
  const Tensor uh = random_tensor(4, {2, 2, 3});
  const Tensor target = random_tensor(5, {2, 2, 3});
  const Tensor logits = random_tensor(6, {2, 2, 2});
  const std::vector<int> y{0, 1};
  for (double lam : {0.0, 1.0}) {
    Tape tape;
    Var mem = ag::mem_loss(tape, tape.leaf(uh), target, tape.leaf(Tensor::vector({1.0, 3.0})),
                           KappaAxis::time);
    Var cls = ag::cls_loss(tape, tape.leaf(logits), y);
    const double got = tape.value(ag::total_loss(tape, cls, mem, lam)).item();
    CHECK(got == (lam == 0.0 ? tape.value(cls).item() : tape.value(mem).item()));
  }
}
