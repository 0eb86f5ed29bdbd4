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
#include <string>
#include <vector>

namespace mpepsn {

struct VerifyConfig {
  std::size_t trials = 1000;
  std::size_t grad_graphs = 100;
  std::uint64_t seed = 42;
  double tau_m = 0.25;
  double v_th = 1.0;
  double alpha = 1.0;
  /// Test hook: feed u_hat[0] instead of zero into step 0 of the parallel
  /// pass used by the t=0 check. The check must then fail.
  bool inject_shift_fault = false;
};

struct CheckResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  /// First failing case (seed/shape), empty when the check passed.
  std::string detail;

  bool passed() const noexcept { return failures == 0; }
};

/// Draws trial `index` of the oracle input family: T <= 8, B <= 4, N <= 64,
/// values U(-2, 2).
struct TrialShape {
  std::size_t T, B, N;
};
TrialShape trial_shape(std::uint64_t seed, std::size_t index);

CheckResult check_t0_exactness(const VerifyConfig& cfg);
CheckResult check_teacher_forced(const VerifyConfig& cfg);
CheckResult check_reset_law(const VerifyConfig& cfg);
CheckResult check_worker_determinism(const VerifyConfig& cfg);
CheckResult check_smooth_gradients(const VerifyConfig& cfg);
CheckResult check_surrogate_chain(const VerifyConfig& cfg);
CheckResult check_lif_bptt(const VerifyConfig& cfg);

/// Every check above, in a fixed order.
std::vector<CheckResult> run_verification(const VerifyConfig& cfg);

std::string verification_csv(const std::vector<CheckResult>& results);
std::string verification_text(const std::vector<CheckResult>& results);

}  // namespace mpepsn
