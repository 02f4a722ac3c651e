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

#ifndef EDGEPART_MODEL_IR_HPP
#define EDGEPART_MODEL_IR_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "edgepart/tensor.hpp"

namespace edgepart {

enum class Padding { Same, Valid };

struct FullyConnected {
  int64_t out_size = 1;
};
struct Conv2D {
  int64_t filters = 1;
  int64_t kernel_h = 1;
  int64_t kernel_w = 1;
  int64_t stride = 1;
  Padding padding = Padding::Same;
};
struct MaxPool {
  int64_t window = 2;
  int64_t stride = 2;
};
struct BatchNorm {};
struct ReLU {};
struct Softmax {};
struct Concat {
  int64_t axis = 0;
};
// Multi-resolution max pooling over the last `window` per-item vectors.
struct TemporalPyramid {
  int levels = 4;
  int window = 15;
};
// Stacks flow fields of `window_len` consecutive frame pairs.
struct FlowStack {
  int window_len = 10;
};
struct Source {
  TensorShape shape;
};
struct Sink {};

using LayerKind = std::variant<FullyConnected, Conv2D, MaxPool, BatchNorm, ReLU, Softmax,
                               Concat, TemporalPyramid, FlowStack, Source, Sink>;

std::string kind_name(const LayerKind& kind);

struct LayerSpec {
  std::string name;
  LayerKind kind;
  std::vector<std::string> inputs;
  uint64_t weights_seed = 0;

  template <typename K>
  bool is() const {
    return std::holds_alternative<K>(kind);
  }
  template <typename K>
  const K& as() const {
    return std::get<K>(kind);
  }
};

// Elementwise layers that carry no cross-element dependency and can run on a
// slice of their producer's output.
bool is_partable_glue(const LayerSpec& layer);
// Layers whose output at tag t depends on several consecutive input tags.
bool is_windowed(const LayerSpec& layer);
// Number of consecutive input items a layer reads per output (1 for most).
int input_window(const LayerSpec& layer);
bool has_weights(const LayerSpec& layer);

TensorShape infer_shape(const LayerSpec& layer, std::span<const TensorShape> in_shapes);

/// DAG of layers. Mutable while being built; validate_graph() freezes shapes
/// and a deterministic topological order.
class ModelGraph {
 public:
  ModelGraph() = default;
  ModelGraph(std::string name, uint64_t seed) : name_(std::move(name)), seed_(seed) {}

  const std::string& name() const { return name_; }
  uint64_t seed() const { return seed_; }

  // Appends a layer; names must be unique.
  void add(LayerSpec layer);
  void set_outputs(std::vector<std::string> outputs) { outputs_ = std::move(outputs); }

  bool contains(const std::string& name) const { return index_.contains(name); }
  const LayerSpec& layer(const std::string& name) const;
  const LayerSpec& layer(int index) const { return layers_[static_cast<size_t>(index)]; }
  int index_of(const std::string& name) const;
  size_t size() const { return layers_.size(); }
  // Declaration order.
  const std::vector<LayerSpec>& layers() const { return layers_; }

  const std::vector<std::string>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }

  bool validated() const { return validated_; }
  const TensorShape& shape(const std::string& name) const;
  const TensorShape& shape(int index) const;
  // Indices in execution order; fixed by validation.
  const std::vector<int>& topo_order() const { return topo_; }
  // Position of a layer within topo_order().
  int topo_rank(int index) const { return topo_rank_[static_cast<size_t>(index)]; }
  const std::vector<int>& consumers(int index) const { return consumers_[static_cast<size_t>(index)]; }
  std::vector<int> input_indices(int index) const;
  // First item tag at which a layer produces output in streaming execution.
  int64_t first_tag(int index) const { return first_tag_[static_cast<size_t>(index)]; }

 private:
  friend ModelGraph validate_graph(ModelGraph graph);

  std::string name_;
  uint64_t seed_ = 0;
  std::vector<LayerSpec> layers_;
  std::map<std::string, int> index_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;

  bool validated_ = false;
  std::vector<TensorShape> shapes_;
  std::vector<int> topo_;
  std::vector<int> topo_rank_;
  std::vector<std::vector<int>> consumers_;
  std::vector<int64_t> first_tag_;
};

/// Checks references and acyclicity, infers every shape and records the
/// topological order (ties broken by declaration order).
ModelGraph validate_graph(ModelGraph graph);

}  // namespace edgepart

#endif  // EDGEPART_MODEL_IR_HPP
