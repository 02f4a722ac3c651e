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

#include <gtest/gtest.h>

#include "edgepart/error.hpp"
#include "edgepart/model_io.hpp"
#include "edgepart/models.hpp"

using namespace edgepart;

namespace {

LayerSpec make(std::string name, LayerKind kind, std::vector<std::string> inputs = {}) {
  return LayerSpec{std::move(name), std::move(kind), std::move(inputs), 7};
}

TensorShape infer(const LayerKind& kind, std::vector<TensorShape> in) {
  return infer_shape(make("x", kind), in);
}

}  // namespace

TEST(ShapeInference, ConvSameKeepsSpatialDims) {
  EXPECT_EQ(infer(Conv2D{256, 5, 5, 1, Padding::Same}, {TensorShape{16, 12, 3}}), (TensorShape{16, 12, 256}));
}

TEST(ShapeInference, FcFlattensInput) {
  EXPECT_EQ(infer(FullyConnected{8192}, {TensorShape{2, 15, 256}}), TensorShape{8192});
}

TEST(ShapeInference, MaxPoolFloorDivides) {
  EXPECT_EQ(infer(MaxPool{2, 2}, {TensorShape{16, 12, 256}}), (TensorShape{8, 6, 256}));
  EXPECT_EQ(infer(MaxPool{3, 2}, {TensorShape{55, 55, 96}}), (TensorShape{27, 27, 96}));
}

TEST(ShapeInference, ValidConvAndPyramidAndConcat) {
  EXPECT_EQ(infer(Conv2D{96, 11, 11, 4, Padding::Valid}, {TensorShape{227, 227, 3}}), (TensorShape{55, 55, 96}));
  EXPECT_EQ(infer(TemporalPyramid{4, 15}, {TensorShape{256}}), (TensorShape{15, 256}));
  EXPECT_EQ(infer(Concat{0}, {TensorShape{15, 256}, TensorShape{15, 256}}), (TensorShape{30, 256}));
  EXPECT_EQ(infer(FlowStack{10}, {TensorShape{16, 12, 3}}), (TensorShape{16, 12, 20}));
}

TEST(ShapeInference, Errors) {
  EXPECT_THROW(infer(Conv2D{4, 3, 3, 1, Padding::Same}, {TensorShape{16}}), ShapeError);
  EXPECT_THROW(infer(Conv2D{4, 7, 7, 1, Padding::Valid}, {TensorShape{5, 5, 1}}), ShapeError);
  EXPECT_THROW(infer(MaxPool{4, 2}, {TensorShape{3, 3, 1}}), ShapeError);
  EXPECT_THROW(infer(Concat{0}, {TensorShape{15, 256}, TensorShape{15, 128}}), ShapeError);
  EXPECT_THROW(infer(ReLU{}, {}), ShapeError);
}

TEST(ValidateGraph, EmptyGraphHasNoSource) {
  EXPECT_THROW(validate_graph(ModelGraph("empty", 1)), GraphError);
}

TEST(ValidateGraph, SelfLoopIsCycle) {
  ModelGraph g("loop", 1);
  g.add(make("in", Source{TensorShape{4}}));
  g.add(make("a", ReLU{}, {"a"}));
  EXPECT_THROW(validate_graph(g), GraphError);
}

TEST(ValidateGraph, DanglingReference) {
  ModelGraph g("dangling", 1);
  g.add(make("in", Source{TensorShape{4}}));
  g.add(make("a", ReLU{}, {"nowhere"}));
  EXPECT_THROW(validate_graph(g), GraphError);
}

TEST(ValidateGraph, ShapeFailureNamesLayer) {
  ModelGraph g("bad", 1);
  g.add(make("in", Source{TensorShape{4}}));
  g.add(make("pool_here", MaxPool{2, 2}, {"in"}));
  try {
    validate_graph(g);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pool_here"), std::string::npos);
  }
}

TEST(ValidateGraph, DuplicateNameRejected) {
  ModelGraph g("dup", 1);
  g.add(make("in", Source{TensorShape{4}}));
  EXPECT_THROW(g.add(make("in", ReLU{}, {"in"})), GraphError);
}

TEST(Models, TwoStreamFullScaleDims) {
  ModelGraph g = build_model("two_stream");
  EXPECT_EQ(g.shape("s_conv1"), (TensorShape{16, 12, 256}));
  EXPECT_EQ(g.shape("t_conv1"), (TensorShape{16, 12, 256}));
  EXPECT_EQ(g.shape("flow"), (TensorShape{16, 12, 20}));
  EXPECT_EQ(g.shape("s_pool"), (TensorShape{8, 6, 256}));
  EXPECT_EQ(g.shape("fc_1s"), TensorShape{256});
  EXPECT_EQ(g.shape("fc_1t"), TensorShape{256});
  EXPECT_EQ(g.shape("s_pyramid"), (TensorShape{15, 256}));
  EXPECT_EQ(g.shape("t_pyramid"), (TensorShape{15, 256}));
  EXPECT_EQ(g.shape("pyramid_concat").elements(), 7680);
  EXPECT_EQ(g.shape("fc_1"), TensorShape{8192});
  EXPECT_EQ(g.shape("fc_2"), TensorShape{8192});
  EXPECT_EQ(g.shape("fc_3"), TensorShape{51});
  EXPECT_EQ(g.outputs(), std::vector<std::string>{"output"});
}

TEST(Models, TwoStreamFirstTags) {
  ModelGraph g = build_model("two_stream");
  EXPECT_EQ(g.first_tag(g.index_of("flow")), 10);
  EXPECT_EQ(g.first_tag(g.index_of("s_pyramid")), 14);
  EXPECT_EQ(g.first_tag(g.index_of("t_pyramid")), 24);
  EXPECT_EQ(g.first_tag(g.index_of("output")), 24);
}

TEST(Models, EighthScaleDividesCounts) {
  ModelGraph g = build_model("two_stream", {.scale = 0.125});
  EXPECT_EQ(g.shape("s_conv2")[2], 32);
  EXPECT_EQ(g.shape("fc_1s")[0], 32);
  EXPECT_EQ(g.shape("fc_1")[0], 1024);
  EXPECT_EQ(g.shape("fc_3")[0], 51);
  EXPECT_EQ(g.size(), build_model("two_stream").size());
}

TEST(Models, HalfDenseVariant) {
  ModelGraph g = build_model("two_stream", {.half_dense = true});
  EXPECT_EQ(g.shape("fc_1")[0], 4096);
  EXPECT_EQ(g.shape("fc_2")[0], 4096);
}

TEST(Models, Vgg16HasThirteenConvsInFiveBlocks) {
  ModelGraph g = build_model("vgg16");
  int convs = 0, fcs = 0, pools = 0;
  for (const auto& l : g.layers()) {
    convs += l.is<Conv2D>();
    fcs += l.is<FullyConnected>();
    pools += l.is<MaxPool>();
  }
  EXPECT_EQ(convs, 13);
  EXPECT_EQ(fcs, 3);
  EXPECT_EQ(pools, 5);
  EXPECT_EQ(g.shape("block5_pool"), (TensorShape{7, 7, 512}));
}

TEST(Models, AlexNetDims) {
  ModelGraph g = build_model("alexnet");
  EXPECT_EQ(g.shape("conv1"), (TensorShape{55, 55, 96}));
  EXPECT_EQ(g.shape("pool5"), (TensorShape{6, 6, 256}));
  EXPECT_EQ(g.shape("fc_3"), TensorShape{1000});
}

TEST(Models, Errors) {
  EXPECT_THROW(build_model("resnet"), Error);
  EXPECT_THROW(build_model("alexnet", {.scale = 0.0}), Error);
  EXPECT_THROW(build_model("alexnet", {.scale = -1.0}), Error);
}

TEST(Models, ScaledCountRoundsUpWithFloorOne) {
  EXPECT_EQ(scaled_count(256, 0.125), 32);
  EXPECT_EQ(scaled_count(51, 0.125), 7);
  EXPECT_EQ(scaled_count(3, 0.01), 1);
}

TEST(ModelIo, RebuildSerializesIdentically) {
  for (const char* name : {"two_stream", "alexnet", "vgg16"}) {
    const auto a = model_to_json(build_model(name, {.scale = 0.5, .seed = 3})).dump();
    const auto b = model_to_json(build_model(name, {.scale = 0.5, .seed = 3})).dump();
    EXPECT_EQ(a, b) << name;
  }
}

TEST(ModelIo, RoundTrip) {
  ModelGraph g = build_model("two_stream", {.scale = 0.125});
  ModelGraph back = model_from_json(model_to_json(g));
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(g).dump());
  for (size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(back.shape(static_cast<int>(i)), g.shape(static_cast<int>(i)));
  }
}

TEST(ModelIo, UnknownKindRejected) {
  auto doc = nlohmann::json::parse(R"({"name":"m","seed":1,"layers":[
    {"name":"in","kind":"source","shape":[4]},{"name":"x","kind":"lstm","inputs":["in"]}]})");
  EXPECT_THROW(model_from_json(doc), GraphError);
}

TEST(ModelIo, MinimalDocumentDefaults) {
  auto doc = nlohmann::json::parse(R"({"layers":[
    {"name":"in","kind":"source","shape":[8]},
    {"name":"fc","kind":"fc","out_size":3,"inputs":["in"]},
    {"name":"out","kind":"sink","inputs":["fc"]}]})");
  ModelGraph g = model_from_json(doc);
  EXPECT_EQ(g.shape("out"), TensorShape{3});
  EXPECT_EQ(g.outputs(), std::vector<std::string>{"out"});
}
