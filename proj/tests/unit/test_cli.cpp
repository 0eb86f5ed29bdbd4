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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mpepsn/bench.hpp"
#include "mpepsn/cli.hpp"
#include "mpepsn/network.hpp"
#include "mpepsn/verify.hpp"

using namespace mpepsn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"train", "--help"}).code == kExitOk);
  CHECK(run({"train", "--no-such-flag"}).code == kExitUsage);
  CHECK(run({"verify", "--mode", "bogus"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bench", "--reps", "4"}).code == kExitUsage);
}

TEST_CASE("verify passes and a corrupted step 0 is caught") {
  TempDir dir("mpepsn_cli_verify");
  const Run ok = run({"verify", "--trials", "40", "--grad-graphs", "5", "--out", dir / "v.csv"});
  CHECK(ok.code == kExitOk);
  CHECK(fs::exists(dir / "v.csv"));
  const Run bad = run({"verify", "--trials", "40", "--grad-graphs", "5", "--inject-fault"});
  CHECK(bad.code == kExitFailure);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("train writes one log row per epoch") {
  TempDir dir("mpepsn_cli_train");
  const Run r = run({"train", "--epochs", "3", "--neurons", "8", "--samples-per-class", "16",
                     "--out", dir / "log.csv", "--save-dataset", dir / "data"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("final epoch=3 ", 0) == 0);
  std::istringstream log(slurp(dir / "log.csv"));
  std::string line;
  std::getline(log, line);
  CHECK(line == training_log_header(1));
  int rows = 0;
  while (std::getline(log, line)) ++rows;
  CHECK(rows == 3);

  // Training from the saved files reproduces the generated run.
  const Run again = run({"train", "--epochs", "3", "--neurons", "8", "--dataset",
                         dir / "data_train.csv", "--test-dataset", dir / "data_test.csv"});
  CHECK(again.code == kExitOk);
  CHECK(again.out == r.out);
}

TEST_CASE("train rejects bad configurations and files") {
  TempDir dir("mpepsn_cli_bad");
  CHECK(run({"train", "--lambda", "1.5", "--epochs", "1"}).code == kExitUsage);
  CHECK(run({"train", "--tau-m", "0", "--epochs", "1"}).code == kExitUsage);
  {
    std::ofstream(dir / "junk.csv") << "not a dataset\n";
  }
  const Run r = run({"train", "--dataset", dir / "junk.csv", "--epochs", "1"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("line") != std::string::npos);
  CHECK(run({"train", "--dataset", dir / "missing.csv"}).code != kExitOk);
}

TEST_CASE("estimate reports and writes a per-step table") {
  TempDir dir("mpepsn_cli_estimate");
  const Run r = run({"estimate", "--time-steps", "4", "--neurons", "16", "--mode", "expectation",
                     "--out", dir / "e.csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("[expectation]") != std::string::npos);
  CHECK(r.out.find("total l2:") != std::string::npos);
  std::istringstream csv(slurp(dir / "e.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,p_mean,b_mean,l2_norm");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  CHECK(run({"estimate", "--mode", "sampled"}).out.find("[sampled]") != std::string::npos);
}

TEST_CASE("bench with several worker counts writes one file each") {
  TempDir dir("mpepsn_cli_bench");
  const Run r = run({"bench", "--time-steps", "2", "--neurons", "64,128", "--workers", "1,2",
                     "--reps", "5", "--out", dir / "b.csv"});
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"b_w1.csv", "b_w2.csv", "b_w1.ratio.dat", "b_w2.ratio.dat"})
    CHECK(fs::exists(dir / f));
  const auto records = parse_bench_csv(slurp(dir / "b_w2.csv"));
  REQUIRE(records.size() == 2);
  CHECK(records[0].workers == 2);
  CHECK(r.out.find("monotone=") != std::string::npos);
}

TEST_CASE("the installed binary maps outcomes to exit codes") {
  const std::string exe = MPEPSN_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("--bogus") == 2);
  CHECK(status("verify --trials 20 --grad-graphs 3") == 0);
  CHECK(status("verify --trials 20 --grad-graphs 3 --inject-fault") == 1);
}
