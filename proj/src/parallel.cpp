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

#include "mpepsn/parallel.hpp"

#include <cstdlib>
#include <memory>
#include <string>

#include "mpepsn/error.hpp"

namespace mpepsn {

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t count, std::size_t parts, std::size_t i) {
  return {count * i / parts, count * (i + 1) / parts};
}

}  // namespace

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers) {
  if (workers_ == 0) throw ValueError("worker count must be at least 1");
  threads_.reserve(workers_ - 1);
  for (std::size_t i = 1; i < workers_; ++i) {
    threads_.emplace_back([this, i] { worker_loop(i); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(std::size_t count, const RangeFn& fn, std::size_t grain) {
  if (count == 0) return;
  if (workers_ == 1 || count < grain) {
    fn(0, count);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    job_count_ = count;
    pending_ = workers_ - 1;
    error_ = nullptr;
    ++generation_;
  }
  start_cv_.notify_all();

  std::exception_ptr local;
  try {
    auto [b, e] = chunk(count, workers_, 0);
    if (b < e) fn(b, e);
  } catch (...) {
    local = std::current_exception();
  }

  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  job_ = nullptr;
  if (local) std::rethrow_exception(local);
  if (error_) std::rethrow_exception(error_);
}

void WorkerPool::worker_loop(std::size_t index) {
  std::size_t seen = 0;
  for (;;) {
    const RangeFn* job;
    std::size_t count;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      job = job_;
      count = job_count_;
    }
    std::exception_ptr err;
    try {
      auto [b, e] = chunk(count, workers_, index);
      if (b < e) (*job)(b, e);
    } catch (...) {
      err = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (err && !error_) error_ = err;
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

std::size_t workers_from_env() {
  const char* env = std::getenv("MPE_PSN_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t pos = 0;
    long long v = std::stoll(env, &pos);
    if (pos != std::string(env).size() || v < 1) throw ValueError("");
    return static_cast<std::size_t>(v);
  } catch (...) {
    throw ValueError(std::string("MPE_PSN_WORKERS must be a positive integer, got '") + env + "'");
  }
}

namespace {

std::unique_ptr<WorkerPool>& pool_slot() {
  static std::unique_ptr<WorkerPool> pool;
  return pool;
}

}  // namespace

WorkerPool& default_pool() {
  auto& slot = pool_slot();
  if (!slot) slot = std::make_unique<WorkerPool>(workers_from_env());
  return *slot;
}

void set_default_workers(std::size_t workers) {
  auto& slot = pool_slot();
  if (slot && slot->workers() == workers) return;
  slot = std::make_unique<WorkerPool>(workers);
}

}  // namespace mpepsn
