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

#include "edgepart/models.hpp"

#include <cmath>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Builder {
 public:
  Builder(std::string name, const ModelOptions& options) : graph_(std::move(name), options.seed), opts_(options) {}

  std::string add(const std::string& name, LayerKind kind, std::vector<std::string> inputs) {
    LayerSpec spec{name, std::move(kind), std::move(inputs), 0};
    spec.weights_seed = splitmix64(opts_.seed ^ static_cast<uint64_t>(graph_.size()));
    graph_.add(std::move(spec));
    return name;
  }

  int64_t n(int64_t count) const { return scaled_count(count, opts_.scale); }

  std::string conv_relu(const std::string& name, const std::string& relu, int64_t filters, int64_t k,
                        const std::string& in) {
    add(name, Conv2D{n(filters), k, k, 1, Padding::Same}, {in});
    return add(relu, ReLU{}, {name});
  }

  // fc_1/relu_1/fc_2/relu_2/fc_3/softmax/output.
  void dense_head(const std::string& in, int64_t hidden, int64_t classes) {
    add("fc_1", FullyConnected{n(hidden)}, {in});
    add("relu_1", ReLU{}, {"fc_1"});
    add("fc_2", FullyConnected{n(hidden)}, {"relu_1"});
    add("relu_2", ReLU{}, {"fc_2"});
    add("fc_3", FullyConnected{classes}, {"relu_2"});
    add("softmax", Softmax{}, {"fc_3"});
    add("output", Sink{}, {"softmax"});
  }

  ModelGraph finish() { return validate_graph(std::move(graph_)); }

 private:
  ModelGraph graph_;
  ModelOptions opts_;
};

ModelGraph build_two_stream(const ModelOptions& o) {
  Builder b("two_stream", o);
  b.add("frames", Source{TensorShape{16, 12, 3}}, {});
  b.add("flow", FlowStack{10}, {"frames"});

  std::vector<std::string> pyramids;
  for (const auto& [prefix, input] : {std::pair{std::string("s_"), std::string("frames")},
                                      std::pair{std::string("t_"), std::string("flow")}}) {
    b.add(prefix + "conv1", Conv2D{b.n(256), 5, 5, 1, Padding::Same}, {input});
    b.add(prefix + "bn1", BatchNorm{}, {prefix + "conv1"});
    b.add(prefix + "relu1", ReLU{}, {prefix + "bn1"});
    b.conv_relu(prefix + "conv2", prefix + "relu2", 256, 3, prefix + "relu1");
    b.conv_relu(prefix + "conv3", prefix + "relu3", 256, 3, prefix + "relu2");
    b.add(prefix + "pool", MaxPool{2, 2}, {prefix + "relu3"});
    const std::string fc = prefix == "s_" ? "fc_1s" : "fc_1t";
    b.add(fc, FullyConnected{b.n(256)}, {prefix + "pool"});
    b.add(fc + "_relu", ReLU{}, {fc});
    pyramids.push_back(b.add(prefix + "pyramid", TemporalPyramid{4, 15}, {fc + "_relu"}));
  }
  b.add("pyramid_concat", Concat{0}, pyramids);
  b.dense_head("pyramid_concat", o.half_dense ? 4096 : 8192, 51);
  return b.finish();
}

ModelGraph build_alexnet(const ModelOptions& o) {
  Builder b("alexnet", o);
  b.add("image", Source{TensorShape{227, 227, 3}}, {});
  b.add("conv1", Conv2D{b.n(96), 11, 11, 4, Padding::Valid}, {"image"});
  b.add("relu1", ReLU{}, {"conv1"});
  b.add("pool1", MaxPool{3, 2}, {"relu1"});
  b.conv_relu("conv2", "relu2", 256, 5, "pool1");
  b.add("pool2", MaxPool{3, 2}, {"relu2"});
  b.conv_relu("conv3", "relu3", 384, 3, "pool2");
  b.conv_relu("conv4", "relu4", 384, 3, "relu3");
  b.conv_relu("conv5", "relu5", 256, 3, "relu4");
  b.add("pool5", MaxPool{3, 2}, {"relu5"});
  b.dense_head("pool5", 4096, 1000);
  return b.finish();
}

ModelGraph build_single_fc(const ModelOptions& o) {
  Builder b("single_fc", o);
  b.add("vector", Source{TensorShape{256}}, {});
  b.add("fc", FullyConnected{b.n(512)}, {"vector"});
  b.add("output", Sink{}, {"fc"});
  return b.finish();
}

ModelGraph build_vgg16(const ModelOptions& o) {
  Builder b("vgg16", o);
  std::string prev = b.add("image", Source{TensorShape{224, 224, 3}}, {});
  const std::vector<std::vector<int64_t>> blocks = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const std::string block = "block" + std::to_string(bi + 1);
    for (size_t ci = 0; ci < blocks[bi].size(); ++ci) {
      const std::string conv = block + "_conv" + std::to_string(ci + 1);
      prev = b.conv_relu(conv, conv + "_relu", blocks[bi][ci], 3, prev);
    }
    prev = b.add(block + "_pool", MaxPool{2, 2}, {prev});
  }
  b.dense_head(prev, 4096, 1000);
  return b.finish();
}

}  // namespace

int64_t scaled_count(int64_t count, double scale) {
  if (!(scale > 0.0)) throw Error("scale must be positive");
  const double scaled = std::ceil(static_cast<double>(count) * scale - 1e-9);
  return std::max<int64_t>(1, static_cast<int64_t>(scaled));
}

ModelGraph build_model(const std::string& name, const ModelOptions& options) {
  if (!(options.scale > 0.0)) throw Error("scale must be positive");
  if (name == "two_stream") return build_two_stream(options);
  if (name == "alexnet") return build_alexnet(options);
  if (name == "vgg16") return build_vgg16(options);
  if (name == "single_fc") return build_single_fc(options);
  throw Error("unknown model '" + name + "' (expected two_stream, alexnet, vgg16 or single_fc)");
}

}  // namespace edgepart
