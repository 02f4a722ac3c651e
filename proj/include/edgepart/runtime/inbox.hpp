/**
 * Copyright 2026 The edgepart Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EDGEPART_RUNTIME_INBOX_HPP
#define EDGEPART_RUNTIME_INBOX_HPP

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <utility>

#include "edgepart/error.hpp"

namespace edgepart {

// Bounded data lane plus an unbounded control lane, drained control-first.
// The almost-full callback fires on the producer's thread each time data
// occupancy rises to the threshold, and re-arms once it falls below.
template <typename T>
class BoundedInbox {
 public:
  explicit BoundedInbox(size_t capacity, size_t threshold = 0)
      : capacity_(capacity), threshold_(threshold ? threshold : (capacity * 4 + 4) / 5) {
    if (capacity == 0 || threshold_ > capacity) throw Error("bad inbox capacity");
  }

  void on_almost_full(std::function<void()> fn) {
    std::lock_guard lock(mu_);
    signal_ = std::move(fn);
  }

  // Blocks while full. False once closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    space_.wait(lock, [&] { return closed_ || data_.size() < capacity_; });
    if (closed_) return false;
    return enqueue(std::move(item), lock);
  }

  // Non-blocking; false when full or closed.
  bool offer(T item) {
    std::unique_lock lock(mu_);
    if (closed_ || data_.size() >= capacity_) {
      ++rejected_;
      return false;
    }
    return enqueue(std::move(item), lock);
  }

  bool push_control(T item) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return false;
      control_.push_back(std::move(item));
    }
    ready_.notify_one();
    return true;
  }

  // Blocks until an item arrives; empty once closed and drained.
  std::optional<T> pop() { return pop_until(std::chrono::steady_clock::time_point::max()); }

  template <typename Rep, typename Period>
  std::optional<T> pop_for(std::chrono::duration<Rep, Period> timeout) {
    return pop_until(std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout));
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    ready_.notify_all();
    space_.notify_all();
  }

  size_t capacity() const { return capacity_; }
  size_t threshold() const { return threshold_; }
  size_t occupancy() const {
    std::lock_guard lock(mu_);
    return data_.size();
  }
  size_t peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }
  int64_t almost_full_signals() const {
    std::lock_guard lock(mu_);
    return signals_;
  }
  int64_t rejected() const {
    std::lock_guard lock(mu_);
    return rejected_;
  }

 private:
  bool enqueue(T item, std::unique_lock<std::mutex>& lock) {
    data_.push_back(std::move(item));
    peak_ = std::max(peak_, data_.size());
    bool fire = false;
    if (armed_ && data_.size() >= threshold_) {
      armed_ = false;
      fire = true;
      ++signals_;
    }
    auto fn = fire ? signal_ : nullptr;
    lock.unlock();
    ready_.notify_one();
    if (fn) fn();
    return true;
  }

  std::optional<T> pop_until(std::chrono::steady_clock::time_point deadline) {
    std::unique_lock lock(mu_);
    auto has_item = [&] { return closed_ || !control_.empty() || !data_.empty(); };
    if (deadline == std::chrono::steady_clock::time_point::max()) {
      ready_.wait(lock, has_item);
    } else if (!ready_.wait_until(lock, deadline, has_item)) {
      return std::nullopt;
    }
    std::optional<T> out;
    if (!control_.empty()) {
      out = std::move(control_.front());
      control_.pop_front();
    } else if (!data_.empty()) {
      out = std::move(data_.front());
      data_.pop_front();
      if (data_.size() < threshold_) armed_ = true;
      lock.unlock();
      space_.notify_one();
    }
    return out;
  }

  const size_t capacity_;
  const size_t threshold_;
  mutable std::mutex mu_;
  std::condition_variable ready_;
  std::condition_variable space_;
  std::deque<T> data_;
  std::deque<T> control_;
  std::function<void()> signal_;
  bool closed_ = false;
  bool armed_ = true;
  size_t peak_ = 0;
  int64_t signals_ = 0;
  int64_t rejected_ = 0;
};

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_INBOX_HPP
