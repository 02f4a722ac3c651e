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

#include "edgepart/model_io.hpp"

#include <fstream>

#include "edgepart/error.hpp"

namespace edgepart {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json layer_to_json(const LayerSpec& layer) {
  json j;
  j["name"] = layer.name;
  j["kind"] = kind_name(layer.kind);
  j["inputs"] = layer.inputs;
  j["weights_seed"] = layer.weights_seed;
  std::visit(Overloaded{
                 [&](const FullyConnected& fc) { j["out_size"] = fc.out_size; },
                 [&](const Conv2D& c) {
                   j["filters"] = c.filters;
                   j["kernel"] = {c.kernel_h, c.kernel_w};
                   j["stride"] = c.stride;
                   j["padding"] = c.padding == Padding::Same ? "same" : "valid";
                 },
                 [&](const MaxPool& p) {
                   j["window"] = p.window;
                   j["stride"] = p.stride;
                 },
                 [&](const Concat& c) { j["axis"] = c.axis; },
                 [&](const TemporalPyramid& p) {
                   j["levels"] = p.levels;
                   j["window"] = p.window;
                 },
                 [&](const FlowStack& f) { j["window_len"] = f.window_len; },
                 [&](const Source& s) { j["shape"] = s.shape.dims(); },
                 [](const auto&) {},
             },
             layer.kind);
  return j;
}

LayerKind kind_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fc") return FullyConnected{j.at("out_size").get<int64_t>()};
  if (kind == "conv2d") {
    Conv2D c;
    c.filters = j.at("filters").get<int64_t>();
    const json& k = j.at("kernel");
    if (k.is_array()) {
      c.kernel_h = k.at(0).get<int64_t>();
      c.kernel_w = k.at(1).get<int64_t>();
    } else {
      c.kernel_h = c.kernel_w = k.get<int64_t>();
    }
    c.stride = j.value("stride", int64_t{1});
    const std::string pad = j.value("padding", std::string("same"));
    if (pad != "same" && pad != "valid") throw GraphError("unknown padding '" + pad + "'");
    c.padding = pad == "same" ? Padding::Same : Padding::Valid;
    return c;
  }
  if (kind == "maxpool") return MaxPool{j.value("window", int64_t{2}), j.value("stride", int64_t{2})};
  if (kind == "batchnorm") return BatchNorm{};
  if (kind == "relu") return ReLU{};
  if (kind == "softmax") return Softmax{};
  if (kind == "concat") return Concat{j.value("axis", int64_t{0})};
  if (kind == "temporal_pyramid") return TemporalPyramid{j.value("levels", 4), j.value("window", 15)};
  if (kind == "flow_stack") return FlowStack{j.value("window_len", 10)};
  if (kind == "source") return Source{TensorShape(j.at("shape").get<std::vector<int64_t>>())};
  if (kind == "sink") return Sink{};
  throw GraphError("unknown layer kind '" + kind + "'");
}

}  // namespace

json model_to_json(const ModelGraph& graph) {
  json doc;
  doc["name"] = graph.name();
  doc["seed"] = graph.seed();
  doc["inputs"] = graph.inputs();
  doc["outputs"] = graph.outputs();
  json layers = json::array();
  for (const auto& layer : graph.layers()) layers.push_back(layer_to_json(layer));
  doc["layers"] = std::move(layers);
  return doc;
}

ModelGraph model_from_json(const json& doc) {
  try {
    ModelGraph graph(doc.value("name", std::string("model")), doc.value("seed", uint64_t{1}));
    uint64_t index = 0;
    for (const auto& j : doc.at("layers")) {
      LayerSpec spec;
      spec.name = j.at("name").get<std::string>();
      spec.kind = kind_from_json(j);
      spec.inputs = j.value("inputs", std::vector<std::string>{});
      spec.weights_seed = j.value("weights_seed", graph.seed() * 0x9e3779b97f4a7c15ULL + index);
      graph.add(std::move(spec));
      ++index;
    }
    if (doc.contains("outputs")) graph.set_outputs(doc.at("outputs").get<std::vector<std::string>>());
    if (doc.contains("inputs")) {
      auto declared = doc.at("inputs").get<std::vector<std::string>>();
      if (declared != graph.inputs()) throw GraphError("declared inputs do not match source layers");
    }
    return validate_graph(std::move(graph));
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed model document: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

ModelGraph load_model_file(const std::string& path) { return model_from_json(read_json_file(path)); }

void save_model_file(const ModelGraph& graph, const std::string& path) {
  write_json_file(model_to_json(graph), path);
}

}  // namespace edgepart
