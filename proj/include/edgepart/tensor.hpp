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

#ifndef EDGEPART_TENSOR_HPP
#define EDGEPART_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace edgepart {

/// Ordered list of positive extents. Images are (height, width, channels),
/// vectors have a single extent.
class TensorShape {
 public:
  TensorShape() = default;
  TensorShape(std::initializer_list<int64_t> dims);
  explicit TensorShape(std::vector<int64_t> dims);

  size_t rank() const { return dims_.size(); }
  int64_t operator[](size_t i) const { return dims_[i]; }
  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t elements() const;
  int64_t bytes() const { return elements() * static_cast<int64_t>(sizeof(float)); }
  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<int64_t> dims_;
};

/// Dense row-major float32 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorShape shape);
  Tensor(TensorShape shape, std::vector<float> data);

  const TensorShape& shape() const { return shape_; }
  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Same data under a different shape with equal element count.
  Tensor reshaped(TensorShape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  TensorShape shape_;
  std::vector<float> data_;
};

// Largest absolute elementwise difference; +inf on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace edgepart

#endif  // EDGEPART_TENSOR_HPP
