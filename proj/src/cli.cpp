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

#include "mpepsn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "mpepsn/bench.hpp"
#include "mpepsn/datagen.hpp"
#include "mpepsn/network.hpp"
#include "mpepsn/ops.hpp"
#include "mpepsn/tensor_io.hpp"
#include "mpepsn/verify.hpp"

namespace mpepsn {

namespace {

/// Every tunable of every subcommand. Defaults follow the reference setup:
/// tau_m 0.25, lambda 0.01, alpha 1.0, v_th initialised at 1.0.
struct RunConfig {
  std::vector<std::size_t> time_steps;
  std::vector<std::size_t> neurons;
  std::optional<std::size_t> batch;
  std::uint64_t seed = 42;
  double tau_m = 0.25;
  double v_th_init = 1.0;
  double alpha = 1.0;
  double lambda = 0.01;
  std::string kappa_axis = "time";
  double kappa_init = 1.0;
  std::size_t epochs = 200;
  double lr = 0.05;
  double momentum = 0.9;
  double init_gain = 1.0;
  double kappa_lr_scale = 1.0;
  std::vector<std::size_t> workers;
  std::string mode = "sampled";
  int synaptic_delay = 0;
  std::string mem_loss = "on";
  std::string out;
  std::string dataset;

  // Subcommand-specific.
  std::size_t trials = 1000;
  std::size_t grad_graphs = 100;
  bool inject_fault = false;
  std::string test_dataset;
  std::string save_dataset;
  std::string neuron = "mpe-psn";
  std::size_t classes = 2;
  std::size_t features = 16;
  std::size_t samples_per_class = 128;
  double noise_std = 0.3;
  std::string pattern = "rate";
  std::size_t reps = 7;
  std::string input;
};

NeuronParams neuron_params(const RunConfig& c) {
  NeuronParams p;
  p.tau_m = c.tau_m;
  p.v_th = c.v_th_init;
  p.alpha = c.alpha;
  p.validate();
  return p;
}

EstimateMode estimate_mode(const RunConfig& c) {
  return c.mode == "expectation" ? EstimateMode::expectation : EstimateMode::sampled;
}

std::size_t single(const std::vector<std::size_t>& v, std::size_t fallback, const char* flag) {
  if (v.empty()) return fallback;
  if (v.size() != 1) throw ValueError(std::string(flag) + " takes a single value here");
  return v[0];
}

void apply_workers(const RunConfig& c) {
  set_default_workers(single(c.workers, workers_from_env(), "--workers"));
}

void add_neuron_flags(CLI::App& app, RunConfig& c) {
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--tau-m", c.tau_m, "Membrane decay constant in (0, 1]")->capture_default_str();
  app.add_option("--v-th-init", c.v_th_init, "Initial firing threshold")->capture_default_str();
  app.add_option("--alpha", c.alpha, "Surrogate gradient half-width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--workers", c.workers,
                 "Worker threads (falls back to MPE_PSN_WORKERS, then 1)")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
}

void add_mode_flag(CLI::App& app, RunConfig& c) {
  app.add_option("--mode", c.mode, "Membrane estimate mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"sampled", "expectation"}));
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + suffix);
  return out.string();
}

// ---------------------------------------------------------------------------

int cmd_verify(const RunConfig& c, std::ostream& out) {
  apply_workers(c);
  VerifyConfig vc;
  vc.trials = c.trials;
  vc.grad_graphs = c.grad_graphs;
  vc.seed = c.seed;
  vc.tau_m = c.tau_m;
  vc.v_th = c.v_th_init;
  vc.alpha = c.alpha;
  vc.inject_shift_fault = c.inject_fault;
  auto results = run_verification(vc);
  out << verification_text(results);
  if (!c.out.empty()) write_file_atomic(c.out, verification_csv(results));
  const bool ok = std::all_of(results.begin(), results.end(), [](auto& r) { return r.passed(); });
  return ok ? kExitOk : kExitFailure;
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  apply_workers(c);
  LabeledBatch train_set, test_set;
  std::size_t classes = c.classes;
  if (!c.dataset.empty()) {
    train_set = load_dataset(c.dataset, &classes);
    if (!c.test_dataset.empty()) {
      std::size_t test_classes = 0;
      test_set = load_dataset(c.test_dataset, &test_classes);
      if (test_classes != classes) throw ValueError("train and test datasets disagree on K");
    } else {
      test_set = LabeledBatch{Tensor({train_set.x.extent(0), 0, train_set.x.extent(2)}), {}};
    }
  } else {
    DatasetSpec spec;
    spec.classes = c.classes;
    spec.time_steps = single(c.time_steps, 8, "--time-steps");
    spec.features = c.features;
    spec.samples_per_class = c.samples_per_class;
    spec.noise_std = c.noise_std;
    spec.kind = c.pattern == "phase" ? PatternKind::phase_coded : PatternKind::rate_coded;
    spec.seed = c.seed;
    std::tie(train_set, test_set) = generate(spec);
    if (!c.save_dataset.empty()) {
      save_dataset(c.save_dataset + "_train.csv", train_set, classes);
      save_dataset(c.save_dataset + "_test.csv", test_set, classes);
    }
  }

  ModelConfig mc;
  mc.inputs = train_set.x.extent(2);
  mc.time_steps = train_set.x.extent(0);
  mc.classes = classes;
  mc.hidden = c.neurons.empty() ? std::vector<std::size_t>{32, 32} : c.neurons;
  mc.kind = c.neuron == "lif" ? NeuronKind::lif_sequential : NeuronKind::mpe_psn;
  mc.synaptic_delay = c.synaptic_delay;
  mc.init_gain = c.init_gain;
  mc.neuron = neuron_params(c);
  mc.mem.lambda = c.lambda;
  mc.mem.kappa_axis = c.kappa_axis == "neuron" ? KappaAxis::neuron : KappaAxis::time;
  mc.mem.kappa_init = c.kappa_init;

  TrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch_size = c.batch.value_or(32);
  tc.lr = c.lr;
  tc.momentum = c.momentum;
  tc.kappa_lr_scale = c.kappa_lr_scale;
  tc.mode = estimate_mode(c);
  tc.mem_loss = c.mem_loss == "on";
  tc.seed = c.seed;

  SpikingClassifier model(mc, c.seed);
  std::string log = training_log_header(mc.hidden.size()) + "\n";
  auto flush = [&] {
    if (!c.out.empty()) write_file_atomic(c.out, log);
  };
  std::vector<EpochDiagnostics> history;
  try {
    history = train(model, train_set, test_set, tc, [&](const EpochDiagnostics& d) {
      log += training_log_row(d) + "\n";
      flush();
    });
  } catch (const DivergenceError& e) {
    flush();
    err << "training diverged: " << e.what() << '\n';
    return kExitFailure;
  }
  flush();
  if (history.empty()) {
    out << "final epochs=0\n";
    return kExitOk;
  }
  const EpochDiagnostics& last = history.back();
  double l2 = 0.0;
  for (double v : last.l2_norm) l2 += v;
  l2 /= static_cast<double>(std::max<std::size_t>(1, last.l2_norm.size()));
  out << "final epoch=" << last.epoch << " train_acc=" << format_real(last.train_acc)
      << " test_acc=" << format_real(last.test_acc) << " loss_total=" << format_real(last.loss_total)
      << " mean_l2_norm=" << format_real(l2) << '\n';
  return kExitOk;
}

int cmd_bench(const RunConfig& c, std::ostream& out) {
  const std::vector<std::size_t> t_grid =
      c.time_steps.empty() ? std::vector<std::size_t>{8, 16, 32} : c.time_steps;
  const std::vector<std::size_t> n_grid =
      c.neurons.empty() ? std::vector<std::size_t>{1u << 10, 1u << 12, 1u << 14, 1u << 16, 1u << 18}
                        : c.neurons;
  const std::vector<std::size_t> worker_list =
      c.workers.empty() ? std::vector<std::size_t>{workers_from_env()} : c.workers;
  const std::string base = c.out.empty() ? std::string("bench.csv") : c.out;
  for (std::size_t w : worker_list) {
    const std::string path =
        worker_list.size() == 1 ? base : with_suffix(base, "_w" + std::to_string(w)) + ".csv";
    SweepResult res = sweep(t_grid, n_grid, c.batch.value_or(1), w, c.reps, c.seed);
    write_file_atomic(path, bench_csv(res.records));
    write_file_atomic(with_suffix(path, ".ratio.dat"), ratio_matrix(res.records));
    out << "workers=" << w << " wrote " << path << '\n';
    for (const auto& s : res.skipped) out << "skipped " << s << " (allocation failed)\n";
    out << summarize_trend(res.records).describe() << '\n';
  }
  return kExitOk;
}

int cmd_estimate(const RunConfig& c, std::ostream& out) {
  apply_workers(c);
  const NeuronParams p = neuron_params(c);
  Tensor I;
  if (!c.input.empty()) {
    I = load_tensor(c.input);
    require_rank3(I, "estimate input");
  } else {
    const std::size_t T = single(c.time_steps, 8, "--time-steps");
    const std::size_t N = single(c.neurons, 64, "--neurons");
    const std::size_t B = c.batch.value_or(4);
    I = Tensor({T, B, N});
    const Rng rng = Rng(c.seed).split(7);
    for (std::size_t i = 0; i < I.size(); ++i) I[i] = -2.0 + 4.0 * rng.uniform(i);
  }
  const EstimateMode mode = estimate_mode(c);
  ParallelTrace tr = mpe_psn_forward(I, p, mode, Rng(c.seed).split(8));
  Membrane ref = lif_sequential(I, p);

  double pmin = I.empty() ? 0.0 : tr.P[0], pmax = pmin;
  for (double v : tr.P.data()) {
    pmin = std::min(pmin, v);
    pmax = std::max(pmax, v);
  }
  out << "estimator report\n";
  out << "mode: " << c.mode << '\n';
  out << "shape: T=" << I.extent(0) << " B=" << I.extent(1) << " N=" << I.extent(2) << '\n';
  out << "P: min=" << format_real(pmin) << " mean=" << format_real(mean(tr.P))
      << " max=" << format_real(pmax) << '\n';
  if (mode == EstimateMode::sampled) {
    out << "[sampled] spike fraction of Bernoulli draws: " << format_real(mean(tr.b)) << '\n';
  } else {
    out << "[expectation] expected spike fraction (mean P): " << format_real(mean(tr.P)) << '\n';
  }
  std::ostringstream csv;
  csv << "t,p_mean,b_mean,l2_norm\n";
  out << "per-step ||u_hat - u_sequential||_2:\n";
  const std::size_t lanes = I.extent(1) * I.extent(2);
  double total_sq = 0.0;
  for (std::size_t t = 0; t < I.extent(0); ++t) {
    double sq = 0.0, pm = 0.0, bm = 0.0;
    auto uh = tr.u_hat.time_slice(t);
    auto u = ref.u.time_slice(t);
    for (std::size_t j = 0; j < lanes; ++j) {
      const double d = uh[j] - u[j];
      sq += d * d;
      pm += tr.P.time_slice(t)[j];
      bm += tr.b.time_slice(t)[j];
    }
    total_sq += sq;
    const double l2 = std::sqrt(sq);
    out << "  t=" << t << " l2=" << format_real(l2) << '\n';
    csv << t << ',' << format_real(lanes ? pm / lanes : 0.0) << ','
        << format_real(lanes ? bm / lanes : 0.0) << ',' << format_real(l2) << '\n';
  }
  out << "total l2: " << format_real(estimation_l2(tr.u_hat, ref.u)) << '\n';
  if (!c.out.empty()) write_file_atomic(c.out, csv.str());
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"MPE-PSN parallel spiking neuron: verification, training, benchmarking"};
  app.name("mpe-psn");
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run the oracle-equivalence and gradient checks");
  add_neuron_flags(*verify, c);
  verify->add_option("--trials", c.trials, "Random inputs per exactness check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_option("--grad-graphs", c.grad_graphs, "Random graphs for the gradient check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", c.out, "CSV report path");
  verify->add_flag("--inject-fault", c.inject_fault, "Corrupt step 0 of the parallel pass")
      ->group("");

  auto* train_cmd = app.add_subcommand("train", "Train a spiking classifier");
  add_neuron_flags(*train_cmd, c);
  add_mode_flag(*train_cmd, c);
  train_cmd->add_option("--time-steps", c.time_steps, "Time steps of the generated dataset");
  train_cmd->add_option("--neurons", c.neurons, "Spiking layer widths, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", c.batch, "Minibatch size (default 32)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda", c.lambda, "Membrane loss weight")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--kappa-axis", c.kappa_axis, "Axis indexed by kappa")
      ->capture_default_str()
      ->check(CLI::IsMember({"time", "neuron"}));
  train_cmd->add_option("--kappa-init", c.kappa_init, "Initial kappa")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", c.lr, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", c.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--kappa-lr-scale", c.kappa_lr_scale, "Kappa learning rate relative to --lr")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--init-gain", c.init_gain, "Weight init scale (std = gain / sqrt(fan_in))")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--synaptic-delay", c.synaptic_delay, "Synaptic delay in steps")
      ->capture_default_str()
      ->check(CLI::IsMember({0, 1}));
  train_cmd->add_option("--mem-loss", c.mem_loss, "Use the membrane loss (off forces lambda 0)")
      ->capture_default_str()
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--neuron", c.neuron, "Neuron model")
      ->capture_default_str()
      ->check(CLI::IsMember({"mpe-psn", "lif"}));
  train_cmd->add_option("--out", c.out, "Training log CSV path");
  train_cmd->add_option("--dataset", c.dataset, "Training set CSV (default: generate)");
  train_cmd->add_option("--test-dataset", c.test_dataset, "Test set CSV");
  train_cmd->add_option("--save-dataset", c.save_dataset,
                        "Write the generated sets to <prefix>_train.csv and <prefix>_test.csv");
  train_cmd->add_option("--classes", c.classes, "Generated classes")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  train_cmd->add_option("--features", c.features, "Generated input features")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  train_cmd->add_option("--samples-per-class", c.samples_per_class, "Generated samples per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--noise-std", c.noise_std, "Generated noise level")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--pattern", c.pattern, "Generated pattern")
      ->capture_default_str()
      ->check(CLI::IsMember({"rate", "phase"}));

  auto* bench_cmd = app.add_subcommand("bench", "Time sequential LIF against parallel MPE-PSN");
  bench_cmd->add_option("--time-steps", c.time_steps, "T grid, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--neurons", c.neurons, "N grid, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--batch", c.batch, "Batch size (default 1)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--workers", c.workers,
                        "Worker counts; one CSV per count when several are given")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--reps", c.reps, "Timed repetitions per point")
      ->capture_default_str()
      ->check(CLI::Range(5, 1 << 20));
  bench_cmd->add_option("--seed", c.seed, "Input seed")->capture_default_str();
  bench_cmd->add_option("--out", c.out, "CSV path (default bench.csv)");

  auto* estimate_cmd = app.add_subcommand("estimate", "Inspect the membrane estimator");
  add_neuron_flags(*estimate_cmd, c);
  add_mode_flag(*estimate_cmd, c);
  estimate_cmd->add_option("--time-steps", c.time_steps, "T of the random input");
  estimate_cmd->add_option("--neurons", c.neurons, "N of the random input");
  estimate_cmd->add_option("--batch", c.batch, "B of the random input")
      ->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--input", c.input, "Input current tensor CSV");
  estimate_cmd->add_option("--out", c.out, "Per-step report CSV path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(c, out);
    if (*train_cmd) return cmd_train(c, out, err);
    if (*bench_cmd) return cmd_bench(c, out);
    if (*estimate_cmd) return cmd_estimate(c, out);
  } catch (const ValueError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "bad input file: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mpepsn
