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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "mpepsn/autograd.hpp"
#include "mpepsn/bench.hpp"
#include "mpepsn/datagen.hpp"
#include "mpepsn/losses.hpp"
#include "mpepsn/network.hpp"
#include "mpepsn/neuron.hpp"

namespace py = pybind11;
using namespace mpepsn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Tensor::Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

NeuronParams params(double tau_m, double v_th, double alpha) {
  NeuronParams p;
  p.tau_m = tau_m;
  p.v_th = v_th;
  p.alpha = alpha;
  p.validate();
  return p;
}

EstimateMode mode_of(const std::string& m) {
  if (m == "sampled") return EstimateMode::sampled;
  if (m == "expectation") return EstimateMode::expectation;
  throw ValueError("mode must be 'sampled' or 'expectation', got '" + m + "'");
}

KappaAxis axis_of(const std::string& a) {
  if (a == "time") return KappaAxis::time;
  if (a == "neuron") return KappaAxis::neuron;
  throw ValueError("kappa axis must be 'time' or 'neuron', got '" + a + "'");
}

std::optional<Rng> rng_of(std::optional<std::uint64_t> seed) {
  if (seed) return Rng(*seed);
  return std::nullopt;
}

py::dict membrane_dict(const Membrane& m) {
  py::dict d;
  d["h"] = to_array(m.h);
  d["u"] = to_array(m.u);
  d["o"] = to_array(m.o);
  return d;
}

py::tuple batch_tuple(const LabeledBatch& b) {
  return py::make_tuple(to_array(b.x), py::array_t<int>(b.y.size(), b.y.data()));
}

}  // namespace

PYBIND11_MODULE(_mpe_psn, m) {
  m.doc() = "Parallel spiking neuron with membrane-potential estimation";

  py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def(
      "lif_sequential",
      [](const Array& I, double tau_m, double v_th, double alpha) {
        return membrane_dict(lif_sequential(to_tensor(I), params(tau_m, v_th, alpha)));
      },
      py::arg("I"), py::arg("tau_m") = 0.25, py::arg("v_th") = 1.0, py::arg("alpha") = 1.0,
      "Step-by-step LIF with hard reset. I is [T, B, N]; returns h, u, o.");

  m.def(
      "estimate_u_hat",
      [](const Array& I, const std::string& mode, std::optional<std::uint64_t> seed) {
        const Estimate e = estimate_u_hat(to_tensor(I), mode_of(mode), rng_of(seed));
        py::dict d;
        d["P"] = to_array(e.P);
        d["b"] = to_array(e.b);
        d["u_hat"] = to_array(e.u_hat);
        return d;
      },
      py::arg("I"), py::arg("mode") = "sampled", py::arg("seed") = py::none());

  m.def(
      "mpe_psn_forward",
      [](const Array& I, double tau_m, double v_th, double alpha, const std::string& mode,
         std::optional<std::uint64_t> seed) {
        const ParallelTrace tr =
            mpe_psn_forward(to_tensor(I), params(tau_m, v_th, alpha), mode_of(mode), rng_of(seed));
        py::dict d;
        for (auto [name, t] : {std::pair{"I", &tr.I}, {"P", &tr.P}, {"b", &tr.b},
                               {"u_hat", &tr.u_hat}, {"h", &tr.h}, {"u", &tr.u}, {"o", &tr.o}})
          d[name] = to_array(*t);
        return d;
      },
      py::arg("I"), py::arg("tau_m") = 0.25, py::arg("v_th") = 1.0, py::arg("alpha") = 1.0,
      py::arg("mode") = "sampled", py::arg("seed") = py::none(),
      "All time steps at once from the membrane estimate. Sampled mode needs a seed.");

  m.def(
      "teacher_forced_forward",
      [](const Array& I, const Array& u_true, double tau_m, double v_th, double alpha) {
        return membrane_dict(
            teacher_forced_forward(to_tensor(I), to_tensor(u_true), params(tau_m, v_th, alpha)));
      },
      py::arg("I"), py::arg("u_true"), py::arg("tau_m") = 0.25, py::arg("v_th") = 1.0,
      py::arg("alpha") = 1.0);

  m.def(
      "surrogate_grad",
      [](const Array& h, double v_th, double alpha) {
        return to_array(surrogate_grad(to_tensor(h), v_th, alpha));
      },
      py::arg("h"), py::arg("v_th") = 1.0, py::arg("alpha") = 1.0);

  m.def(
      "mem_loss",
      [](const Array& u_hat, const Array& u, const Array& kappa, const std::string& axis) {
        return mem_loss(to_tensor(u_hat), to_tensor(u), to_tensor(kappa), axis_of(axis));
      },
      py::arg("u_hat"), py::arg("u"), py::arg("kappa"), py::arg("axis") = "time");
  m.def(
      "cls_loss",
      [](const Array& logits, const std::vector<int>& labels) {
        return cls_loss(to_tensor(logits), labels);
      },
      py::arg("logits"), py::arg("labels"));
  m.def("total_loss", &total_loss, py::arg("l_cls"), py::arg("l_mem"), py::arg("lam"));
  m.def(
      "spike_rate_percent", [](const Array& o) { return spike_rate_percent(to_tensor(o)); },
      py::arg("o"));

  m.def(
      "generate",
      [](std::size_t classes, std::size_t time_steps, std::size_t features,
         std::size_t samples_per_class, double noise_std, const std::string& pattern,
         std::uint64_t seed) {
        DatasetSpec s;
        s.classes = classes;
        s.time_steps = time_steps;
        s.features = features;
        s.samples_per_class = samples_per_class;
        s.noise_std = noise_std;
        if (pattern == "rate") s.kind = PatternKind::rate_coded;
        else if (pattern == "phase") s.kind = PatternKind::phase_coded;
        else throw ValueError("pattern must be 'rate' or 'phase'");
        s.seed = seed;
        const auto [train, test] = generate(s);
        return py::make_tuple(batch_tuple(train), batch_tuple(test));
      },
      py::arg("classes") = 2, py::arg("time_steps") = 8, py::arg("features") = 16,
      py::arg("samples_per_class") = 128, py::arg("noise_std") = 0.3, py::arg("pattern") = "rate",
      py::arg("seed") = 42, "Returns ((x_train, y_train), (x_test, y_test)); x is [T, B, N].");

  m.def(
      "time_forward",
      [](const std::string& kind, std::size_t T, std::size_t B, std::size_t N, std::size_t workers,
         std::size_t reps, std::uint64_t seed) {
        ForwardKind k;
        if (kind == "sequential") k = ForwardKind::sequential;
        else if (kind == "parallel") k = ForwardKind::parallel;
        else throw ValueError("kind must be 'sequential' or 'parallel'");
        Timings t;
        {
          py::gil_scoped_release release;
          t = time_forward(k, T, B, N, workers, reps, seed);
        }
        py::dict d;
        d["ns"] = t.ns;
        d["median_ns"] = t.median_ns;
        return d;
      },
      py::arg("kind"), py::arg("T"), py::arg("B"), py::arg("N"), py::arg("workers") = 1,
      py::arg("reps") = 5, py::arg("seed") = 0, "Wall-clock nanoseconds per forward pass.");
}
