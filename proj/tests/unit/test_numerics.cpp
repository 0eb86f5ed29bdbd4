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

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mpepsn/ops.hpp"
#include "mpepsn/parallel.hpp"
#include "mpepsn/tensor.hpp"
#include "mpepsn/tensor_io.hpp"

using namespace mpepsn;

namespace {

Tensor iota(Tensor::Shape shape, double start = 0.0, double step = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + step * static_cast<double>(i);
  return t;
}

// Textbook triple loop, k innermost and ascending.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.extent(0), k = a.extent(1), p = b.extent(1);
  Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < k; ++q) acc += a[i * k + q] * b[q * p + j];
      c[i * p + j] = acc;
    }
  return c;
}

}  // namespace

TEST_CASE("tensor construction and indexing") {
  Tensor s;
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(s.item() == 0.0);

  Tensor t = iota({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.at(1, 2, 3) == 23.0);
  CHECK(t.at(1, 0, 0) == 12.0);
  CHECK(t.time_slice(1).size() == 12);
  CHECK(t.time_slice(1)[0] == 12.0);
  CHECK(shape_string(t.shape()) == "[2,3,4]");
  CHECK_THROWS_AS(t.extent(3), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 1, 1}), ShapeError);
  CHECK(t.reshaped({6, 4})[5] == 5.0);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("elementwise arithmetic") {
  const Tensor a = Tensor::vector({1.0, 2.0, 3.0});
  const Tensor b = Tensor::vector({0.5, -1.0, 4.0});
  CHECK(add(a, b) == Tensor::vector({1.5, 1.0, 7.0}));
  CHECK(sub(a, b) == Tensor::vector({0.5, 3.0, -1.0}));
  CHECK(mul(a, b) == Tensor::vector({0.5, -2.0, 12.0}));
  CHECK(add(a, 1.0) == Tensor::vector({2.0, 3.0, 4.0}));
  CHECK(scale(a, -2.0) == Tensor::vector({-2.0, -4.0, -6.0}));
  CHECK_THROWS_AS(add(a, Tensor::vector({1.0, 2.0})), ShapeError);
  CHECK_THROWS_AS(mul(Tensor({3, 1}), Tensor({1, 3})), ShapeError);
}

TEST_CASE("matmul equals the naive triple loop exactly") {
  RngCursor cur(Rng(77));
  for (std::size_t m : {1u, 3u, 16u})
    for (std::size_t k : {1u, 7u, 16u})
      for (std::size_t p : {1u, 5u, 16u}) {
        Tensor a({m, k}), b({k, p});
        for (double& v : a.data()) v = cur.uniform(-1.0, 1.0);
        for (double& v : b.data()) v = cur.uniform(-1.0, 1.0);
        CHECK(matmul(a, b) == naive_matmul(a, b));
      }
  CHECK(matmul(Tensor::full({1, 1}, 2.0), Tensor::full({1, 1}, 3.0))[0] == 6.0);
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  CHECK_THROWS_AS(matmul(Tensor({2, 3, 1}), Tensor({3, 1})), ShapeError);
}

TEST_CASE("matmul is identical across worker counts") {
  RngCursor cur(Rng(4));
  Tensor a({300, 64}), b({64, 70});
  for (double& v : a.data()) v = cur.uniform(-1.0, 1.0);
  for (double& v : b.data()) v = cur.uniform(-1.0, 1.0);
  WorkerPool one(1), four(4);
  CHECK(matmul(a, b, one) == matmul(a, b, four));
}

TEST_CASE("sigmoid is stable at the extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  for (double x : {-3.0, -0.6, 0.6, 3.0}) {
    CHECK(sigmoid(x) == doctest::Approx(1.0 / (1.0 + std::exp(-x))).epsilon(1e-15));
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("reductions over axes") {
  const Tensor t = iota({2, 3, 2});
  const Tensor over_time = reduce(Reduction::sum, t, {0});
  CHECK(over_time.shape() == Tensor::Shape{3, 2});
  CHECK(over_time[0] == 0.0 + 6.0);
  CHECK(over_time[5] == 5.0 + 11.0);

  const Tensor over_last = reduce(Reduction::mean, t, {2});
  CHECK(over_last.shape() == Tensor::Shape{2, 3});
  CHECK(over_last[0] == 0.5);

  const Tensor over_two = reduce(Reduction::sum, t, {2, 0});
  CHECK(over_two.shape() == Tensor::Shape{3});
  CHECK(over_two[1] == 2.0 + 3.0 + 8.0 + 9.0);

  CHECK(sum(t) == 66.0);
  CHECK(mean(t) == 5.5);
  CHECK(l2_norm(Tensor::vector({3.0, 4.0})) == 5.0);
  CHECK(reduce(Reduction::l2_norm, Tensor({2, 2}, std::vector<double>{3, 4, 0, 0}), {1}) ==
        Tensor::vector({5.0, 0.0}));
  CHECK_THROWS_AS(reduce(Reduction::sum, t, {3}), ShapeError);
  CHECK_THROWS_AS(reduce(Reduction::sum, t, {1, 1}), ShapeError);
  CHECK_THROWS_AS(mean(Tensor({0})), ShapeError);
}

TEST_CASE("finiteness check") {
  CHECK(all_finite(Tensor::vector({1.0, -2.0})));
  CHECK_FALSE(all_finite(Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()})));
  CHECK_FALSE(all_finite(Tensor::vector({std::numeric_limits<double>::infinity()})));
}

TEST_CASE("worker pool covers the range exactly once") {
  for (std::size_t workers : {1u, 2u, 5u}) {
    WorkerPool pool(workers);
    for (std::size_t count : {0u, 1u, 3u, 1000u}) {
      std::vector<std::atomic<int>> seen(count);
      pool.run(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) seen[i]++;
      });
      for (auto& s : seen) CHECK(s.load() == 1);
    }
  }
}

TEST_CASE("worker pool propagates exceptions") {
  WorkerPool pool(3);
  CHECK_THROWS_AS(pool.run(100,
                           [](std::size_t lo, std::size_t) {
                             if (lo > 0) throw std::runtime_error("boom");
                           }),
                  std::runtime_error);
  int calls = 0;
  pool.run(10, [&](std::size_t, std::size_t) { ++calls; }, 100);
  CHECK(calls == 1);
  CHECK_THROWS_AS(WorkerPool(0), ValueError);
}

TEST_CASE("real formatting round-trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) {
    CHECK(parse_real(format_real(v), 1) == v);
  }
  CHECK_THROWS_AS(parse_real("1.5x", 3), ParseError);
  CHECK_THROWS_AS(parse_real("nan", 3), ParseError);
  CHECK_THROWS_AS(parse_real("", 3), ParseError);
  try {
    parse_real("abc", 7);
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
  }
}

TEST_CASE("tensor csv round-trip") {
  RngCursor cur(Rng(12));
  for (Tensor::Shape shape : {Tensor::Shape{}, Tensor::Shape{4}, Tensor::Shape{2, 3},
                              Tensor::Shape{3, 2, 5}}) {
    Tensor t(shape);
    for (double& v : t.data()) v = cur.normal() * 1e3;
    std::stringstream ss;
    write_tensor_csv(ss, t);
    CHECK(read_tensor_csv(ss) == t);
  }
}

TEST_CASE("tensor csv parse errors carry line numbers") {
  auto parse_line = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_tensor_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK_THROWS_AS(
      [] {
        std::istringstream in("");
        read_tensor_csv(in);
      }(),
      ParseError);
  CHECK(parse_line("1,2\n") == 1);
  CHECK(parse_line("# shape: 2,2\n1,2\n3\n") == 3);
  CHECK(parse_line("# shape: 2,2\n1,2\n3,oops\n") == 3);
  CHECK(parse_line("# shape: 2,2\n1,2\n") == 3);
  CHECK(parse_line("# shape: 1,2\n1,2\n5,6\n") == 3);
}

TEST_CASE("atomic file writes replace the target") {
  const auto dir = std::filesystem::temp_directory_path() / "mpepsn_numerics_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.csv").string();
  save_tensor(path, Tensor::vector({1.0, 2.0}));
  save_tensor(path, Tensor::vector({3.0}));
  CHECK(load_tensor(path) == Tensor::vector({3.0}));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(load_tensor((dir / "missing.csv").string()), Error);
  std::filesystem::remove_all(dir);
}
