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

#include "edgepart/model_ir.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

ShapeError layer_error(const LayerSpec& layer, const std::string& what) {
  return ShapeError("layer '" + layer.name + "' (" + kind_name(layer.kind) + "): " + what);
}

const TensorShape& require_rank3(const LayerSpec& layer, std::span<const TensorShape> in) {
  if (in[0].rank() != 3) throw layer_error(layer, "expects a rank-3 input, got " + in[0].to_string());
  return in[0];
}

}  // namespace

std::string kind_name(const LayerKind& kind) {
  return std::visit(Overloaded{
                        [](const FullyConnected&) { return std::string("fc"); },
                        [](const Conv2D&) { return std::string("conv2d"); },
                        [](const MaxPool&) { return std::string("maxpool"); },
                        [](const BatchNorm&) { return std::string("batchnorm"); },
                        [](const ReLU&) { return std::string("relu"); },
                        [](const Softmax&) { return std::string("softmax"); },
                        [](const Concat&) { return std::string("concat"); },
                        [](const TemporalPyramid&) { return std::string("temporal_pyramid"); },
                        [](const FlowStack&) { return std::string("flow_stack"); },
                        [](const Source&) { return std::string("source"); },
                        [](const Sink&) { return std::string("sink"); },
                    },
                    kind);
}

bool is_partable_glue(const LayerSpec& layer) { return layer.is<ReLU>() || layer.is<BatchNorm>(); }

bool is_windowed(const LayerSpec& layer) { return layer.is<TemporalPyramid>() || layer.is<FlowStack>(); }

int input_window(const LayerSpec& layer) {
  if (layer.is<TemporalPyramid>()) return layer.as<TemporalPyramid>().window;
  if (layer.is<FlowStack>()) return layer.as<FlowStack>().window_len + 1;
  return 1;
}

bool has_weights(const LayerSpec& layer) {
  return layer.is<FullyConnected>() || layer.is<Conv2D>() || layer.is<BatchNorm>();
}

TensorShape infer_shape(const LayerSpec& layer, std::span<const TensorShape> in) {
  if (layer.is<Source>()) {
    if (!in.empty()) throw layer_error(layer, "source layers take no inputs");
    return layer.as<Source>().shape;
  }
  if (in.empty()) throw layer_error(layer, "no input shapes");

  return std::visit(
      Overloaded{
          [&](const FullyConnected& fc) -> TensorShape {
            if (fc.out_size < 1) throw layer_error(layer, "out_size must be >= 1");
            return TensorShape{fc.out_size};
          },
          [&](const Conv2D& conv) -> TensorShape {
            const TensorShape& s = require_rank3(layer, in);
            if (conv.filters < 1 || conv.kernel_h < 1 || conv.kernel_w < 1 || conv.stride < 1) {
              throw layer_error(layer, "filters, kernel and stride must be >= 1");
            }
            if (conv.padding == Padding::Same) {
              return TensorShape{(s[0] - 1) / conv.stride + 1, (s[1] - 1) / conv.stride + 1, conv.filters};
            }
            if (conv.kernel_h > s[0] || conv.kernel_w > s[1]) {
              throw layer_error(layer, "kernel larger than input " + s.to_string());
            }
            return TensorShape{(s[0] - conv.kernel_h) / conv.stride + 1, (s[1] - conv.kernel_w) / conv.stride + 1,
                               conv.filters};
          },
          [&](const MaxPool& pool) -> TensorShape {
            const TensorShape& s = require_rank3(layer, in);
            if (pool.window < 1 || pool.stride < 1) throw layer_error(layer, "window and stride must be >= 1");
            if (pool.window > s[0] || pool.window > s[1]) {
              throw layer_error(layer, "pool window exceeds input " + s.to_string());
            }
            return TensorShape{(s[0] - pool.window) / pool.stride + 1, (s[1] - pool.window) / pool.stride + 1, s[2]};
          },
          [&](const BatchNorm&) -> TensorShape { return in[0]; },
          [&](const ReLU&) -> TensorShape { return in[0]; },
          [&](const Softmax&) -> TensorShape { return in[0]; },
          [&](const Sink&) -> TensorShape { return in[0]; },
          [&](const Concat& cat) -> TensorShape {
            const size_t rank = in[0].rank();
            if (cat.axis < 0 || static_cast<size_t>(cat.axis) >= rank) throw layer_error(layer, "bad concat axis");
            std::vector<int64_t> dims = in[0].dims();
            for (size_t i = 1; i < in.size(); ++i) {
              if (in[i].rank() != rank) throw layer_error(layer, "rank mismatch between concat inputs");
              for (size_t d = 0; d < rank; ++d) {
                if (d == static_cast<size_t>(cat.axis)) continue;
                if (in[i][d] != dims[d]) throw layer_error(layer, "concat inputs disagree off-axis");
              }
              dims[static_cast<size_t>(cat.axis)] += in[i][static_cast<size_t>(cat.axis)];
            }
            return TensorShape(std::move(dims));
          },
          [&](const TemporalPyramid& pyr) -> TensorShape {
            if (pyr.levels < 1 || pyr.window < 1) throw layer_error(layer, "levels and window must be >= 1");
            return TensorShape{(int64_t{1} << pyr.levels) - 1, in[0].elements()};
          },
          [&](const FlowStack& flow) -> TensorShape {
            const TensorShape& s = require_rank3(layer, in);
            if (flow.window_len < 1) throw layer_error(layer, "window_len must be >= 1");
            return TensorShape{s[0], s[1], 2 * static_cast<int64_t>(flow.window_len)};
          },
          [&](const Source&) -> TensorShape { return layer.as<Source>().shape; },
      },
      layer.kind);
}

void ModelGraph::add(LayerSpec layer) {
  if (layer.name.empty()) throw GraphError("layer name must not be empty");
  if (index_.contains(layer.name)) throw GraphError("duplicate layer name '" + layer.name + "'");
  index_[layer.name] = static_cast<int>(layers_.size());
  if (layer.is<Source>()) inputs_.push_back(layer.name);
  layers_.push_back(std::move(layer));
  validated_ = false;
}

const LayerSpec& ModelGraph::layer(const std::string& name) const { return layers_[static_cast<size_t>(index_of(name))]; }

int ModelGraph::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw GraphError("unknown layer '" + name + "'");
  return it->second;
}

const TensorShape& ModelGraph::shape(const std::string& name) const { return shape(index_of(name)); }

const TensorShape& ModelGraph::shape(int index) const {
  if (!validated_) throw GraphError("graph '" + name_ + "' has not been validated");
  return shapes_[static_cast<size_t>(index)];
}

std::vector<int> ModelGraph::input_indices(int index) const {
  std::vector<int> out;
  for (const auto& name : layer(index).inputs) out.push_back(index_of(name));
  return out;
}

ModelGraph validate_graph(ModelGraph graph) {
  const int n = static_cast<int>(graph.layers_.size());
  if (graph.inputs_.empty()) throw GraphError("graph '" + graph.name_ + "' has no source layer");

  std::vector<std::vector<int>> consumers(static_cast<size_t>(n));
  std::vector<int> pending(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const LayerSpec& layer = graph.layers_[static_cast<size_t>(i)];
    if (!layer.is<Source>() && layer.inputs.empty()) {
      throw GraphError("layer '" + layer.name + "' has no inputs");
    }
    for (const auto& in : layer.inputs) {
      auto it = graph.index_.find(in);
      if (it == graph.index_.end()) {
        throw GraphError("layer '" + layer.name + "' references unknown input '" + in + "'");
      }
      consumers[static_cast<size_t>(it->second)].push_back(i);
      ++pending[static_cast<size_t>(i)];
    }
  }

  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (pending[static_cast<size_t>(i)] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int c : consumers[static_cast<size_t>(i)]) {
      if (--pending[static_cast<size_t>(c)] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(order.size()) != n) {
    for (int i = 0; i < n; ++i) {
      if (pending[static_cast<size_t>(i)] > 0) {
        throw GraphError("cycle detected through layer '" + graph.layers_[static_cast<size_t>(i)].name + "'");
      }
    }
  }

  graph.shapes_.assign(static_cast<size_t>(n), TensorShape{});
  graph.first_tag_.assign(static_cast<size_t>(n), 0);
  for (int i : order) {
    const LayerSpec& layer = graph.layers_[static_cast<size_t>(i)];
    std::vector<TensorShape> in_shapes;
    int64_t first = 0;
    for (const auto& in : layer.inputs) {
      int j = graph.index_.at(in);
      in_shapes.push_back(graph.shapes_[static_cast<size_t>(j)]);
      first = std::max(first, graph.first_tag_[static_cast<size_t>(j)]);
    }
    graph.shapes_[static_cast<size_t>(i)] = infer_shape(layer, in_shapes);
    graph.first_tag_[static_cast<size_t>(i)] = first + input_window(layer) - 1;
  }

  if (graph.outputs_.empty()) {
    for (const auto& layer : graph.layers_) {
      if (layer.is<Sink>()) graph.outputs_.push_back(layer.name);
    }
  }
  if (graph.outputs_.empty()) {
    for (int i = 0; i < n; ++i) {
      if (consumers[static_cast<size_t>(i)].empty()) graph.outputs_.push_back(graph.layers_[static_cast<size_t>(i)].name);
    }
  }
  for (const auto& out : graph.outputs_) {
    if (!graph.index_.contains(out)) throw GraphError("unknown output '" + out + "'");
  }

  graph.topo_ = std::move(order);
  graph.topo_rank_.assign(static_cast<size_t>(n), 0);
  for (int r = 0; r < n; ++r) graph.topo_rank_[static_cast<size_t>(graph.topo_[static_cast<size_t>(r)])] = r;
  graph.consumers_ = std::move(consumers);
  graph.validated_ = true;
  return graph;
}

}  // namespace edgepart
