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

#include "edgepart/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "edgepart/error.hpp"

namespace edgepart {

TensorShape::TensorShape(std::initializer_list<int64_t> dims) : TensorShape(std::vector<int64_t>(dims)) {}

TensorShape::TensorShape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
  for (int64_t d : dims_) {
    if (d < 1) throw ShapeError("tensor extents must be >= 1, got " + to_string());
  }
}

int64_t TensorShape::elements() const {
  int64_t n = 1;
  for (int64_t d : dims_) n *= d;
  return dims_.empty() ? 0 : n;
}

std::string TensorShape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(TensorShape shape) : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.elements()), 0.0f) {}

Tensor::Tensor(TensorShape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_.elements()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.to_string());
  }
}

Tensor Tensor::reshaped(TensorShape shape) const {
  if (shape.elements() != shape_.elements()) {
    throw ShapeError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (size_t i = 0; i < x.size(); ++i) {
    double d = std::fabs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace edgepart
