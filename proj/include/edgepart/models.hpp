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

#ifndef EDGEPART_MODELS_HPP
#define EDGEPART_MODELS_HPP

#include <cstdint>
#include <string>

#include "edgepart/model_ir.hpp"

namespace edgepart {

struct ModelOptions {
  // Channel/unit multiplier; counts are rounded up with a floor of 1.
  // Classifier widths are never scaled.
  double scale = 1.0;
  uint64_t seed = 1;
  // two_stream only: 4k-4k-51 dense head instead of 8k-8k-51. Reduced
  // accuracy, so it must be requested explicitly.
  bool half_dense = false;
};

/// Builds and validates one of: two_stream, alexnet, vgg16, single_fc (a
/// lone dense layer for smoke tests).
ModelGraph build_model(const std::string& name, const ModelOptions& options = {});

// Rounded-up scaled count, minimum 1.
int64_t scaled_count(int64_t count, double scale);

}  // namespace edgepart

#endif  // EDGEPART_MODELS_HPP
