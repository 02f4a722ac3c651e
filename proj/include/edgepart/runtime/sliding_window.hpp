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

#ifndef EDGEPART_RUNTIME_SLIDING_WINDOW_HPP
#define EDGEPART_RUNTIME_SLIDING_WINDOW_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgepart/error.hpp"

namespace edgepart {

// Tag-ordered reorder buffer. Emits runs of `length` tags spaced `stride`
// apart, starting at `start`, and slides by one stride per emission.
template <typename T>
class SlidingWindow {
 public:
  struct Window {
    int64_t tag = 0;  // last tag of the run
    std::vector<T> items;
  };

  // `slack` extra pending items beyond `length` are expected under
  // reordering; exceeding it is counted, never dropped.
  explicit SlidingWindow(int64_t length, int64_t stride = 1, int64_t start = 0, int64_t slack = 0)
      : length_(length), stride_(stride), next_(start), slack_(slack) {
    if (length < 1 || stride < 1 || slack < 0) throw Error("bad sliding window configuration");
  }

  std::vector<Window> push(int64_t tag, T item) {
    if (tag < next_) {
      ++late_;
      return {};
    }
    if ((tag - next_) % stride_ != 0) {
      throw Error("tag " + std::to_string(tag) + " is off this window's stride");
    }
    if (pending_.count(tag)) throw Error("duplicate tag " + std::to_string(tag));
    pending_.emplace(tag, std::move(item));
    peak_ = std::max(peak_, pending_.size());
    if (static_cast<int64_t>(pending_.size()) > length_ + slack_) ++overflows_;

    std::vector<Window> out;
    while (complete()) {
      Window w;
      w.tag = next_ + (length_ - 1) * stride_;
      for (int64_t i = 0; i < length_; ++i) w.items.push_back(pending_.at(next_ + i * stride_));
      pending_.erase(next_);
      next_ += stride_;
      out.push_back(std::move(w));
    }
    return out;
  }

  int64_t next_tag() const { return next_; }
  int64_t length() const { return length_; }
  size_t pending() const { return pending_.size(); }
  size_t peak_pending() const { return peak_; }
  int64_t late() const { return late_; }
  int64_t overflows() const { return overflows_; }
  bool holds(int64_t tag) const { return pending_.count(tag) > 0; }

 private:
  bool complete() const {
    for (int64_t i = 0; i < length_; ++i) {
      if (!pending_.count(next_ + i * stride_)) return false;
    }
    return true;
  }

  int64_t length_;
  int64_t stride_;
  int64_t next_;
  int64_t slack_;
  std::map<int64_t, T> pending_;
  size_t peak_ = 0;
  int64_t late_ = 0;
  int64_t overflows_ = 0;
};

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_SLIDING_WINDOW_HPP
