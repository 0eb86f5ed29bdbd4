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

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mpepsn {

/// Fixed-size pool of workers that split an index range into contiguous
/// chunks. Chunk boundaries depend only on (range, worker count) and every
/// kernel run through the pool writes disjoint outputs, so results never
/// depend on scheduling.
class WorkerPool {
 public:
  using RangeFn = std::function<void(std::size_t begin, std::size_t end)>;

  explicit WorkerPool(std::size_t workers = 1);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t workers() const noexcept { return workers_; }

  /// Runs fn over [0, count) split into `workers()` chunks and blocks until
  /// all chunks finish. The calling thread executes chunk 0. Ranges shorter
  /// than `grain` run inline on the caller.
  void run(std::size_t count, const RangeFn& fn, std::size_t grain = 1);

 private:
  void worker_loop(std::size_t index);

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const RangeFn* job_ = nullptr;
  std::size_t job_count_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

/// Worker count from the MPE_PSN_WORKERS environment variable, or 1.
std::size_t workers_from_env();

/// Process-wide pool used by tensor kernels when no pool is passed.
WorkerPool& default_pool();
/// Replaces the process-wide pool. Not safe while kernels are running.
void set_default_workers(std::size_t workers);

/// Elements below which kernels stay on the calling thread.
inline constexpr std::size_t kParallelGrain = 1 << 14;

}  // namespace mpepsn
