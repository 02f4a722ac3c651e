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

#ifndef EDGEPART_ENGINE_HPP
#define EDGEPART_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "edgepart/model_ir.hpp"
#include "edgepart/tensor.hpp"

namespace edgepart {

struct LayerParams {
  Tensor weights;  // fc: out x in; conv: filters x kh x kw x in_ch
  Tensor bias;
  // BatchNorm only.
  Tensor mean, var, gamma, beta;

  bool empty() const { return weights.size() == 0 && bias.size() == 0 && mean.size() == 0; }
  // Parameter count (weights + bias + BatchNorm vectors).
  int64_t count() const;
};

constexpr float kBatchNormEpsilon = 1e-5f;

// Deterministic parameters from the layer's weights_seed. Layers without
// weights get empty params.
LayerParams generate_params(const ModelGraph& graph, int layer_index);

// Output rows [begin, end) of an fc, filters of a conv, channels of a
// BatchNorm. Row order and per-row values are preserved.
LayerParams slice_params(const LayerParams& params, int64_t begin, int64_t end);

Tensor forward_fc(const Tensor& input, const LayerParams& params);
Tensor forward_conv(const Tensor& input, const LayerParams& params, const Conv2D& spec);
Tensor forward_relu(const Tensor& input);
Tensor forward_batchnorm(const Tensor& input, const LayerParams& params);
Tensor forward_softmax(const Tensor& input);
Tensor forward_maxpool(const Tensor& input, const MaxPool& spec);
Tensor forward_concat(std::span<const Tensor> inputs, int64_t axis);

// Rows are level-major then range-major. A level-k split gives range r the
// frames [r*base + min(r, rem), ...) with base = n / 2^k, rem = n % 2^k; a
// range left empty (n < 2^k) takes the frame at its start, clamped to n-1.
Tensor temporal_pyramid(std::span<const Tensor> frames, int levels);

using FlowFn = std::function<Tensor(const Tensor& prev, const Tensor& next)>;
// Default flow: signed mean-intensity difference next - prev, copied into
// both (dx, dy) channels.
Tensor difference_flow(const Tensor& prev, const Tensor& next);
Tensor flow_stack(std::span<const Tensor> frames, int window_len, const FlowFn& flow = difference_flow);

// Non-windowed layers get one tensor per declared input; windowed layers get
// their window of items from the single producer, oldest first.
Tensor forward_layer(const LayerSpec& layer, const LayerParams& params, std::span<const Tensor> inputs);

using TensorMap = std::map<std::string, Tensor>;

// Single item through a graph with no windowed layers.
TensorMap run_reference(const ModelGraph& graph, const TensorMap& inputs);

// Tagged item sequence per source. Returns, for every tag at which the graph
// outputs are defined, the output tensors by name. `trace`, when given,
// receives every layer's value at every tag where it is defined.
std::map<int64_t, TensorMap> run_reference_stream(const ModelGraph& graph,
                                                  const std::map<std::string, std::vector<Tensor>>& inputs,
                                                  std::map<int64_t, TensorMap>* trace = nullptr);

// Seeded inputs in [0, 1) for every source of the graph.
std::map<std::string, std::vector<Tensor>> seeded_inputs(const ModelGraph& graph, int64_t items, uint64_t seed);

}  // namespace edgepart

#endif  // EDGEPART_ENGINE_HPP
