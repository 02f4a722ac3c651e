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

#include <cmath>
#include <numeric>
#include <random>

#include "edgepart/engine.hpp"
#include "edgepart/error.hpp"
#include "edgepart/kernels.hpp"
#include "edgepart/models.hpp"

using namespace edgepart;

namespace {

Tensor random_tensor(TensorShape shape, std::mt19937& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) v = dist(rng);
  return t;
}

Tensor naive_fc(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t out = w.shape()[0], in = w.shape()[1];
  std::vector<float> y(static_cast<size_t>(out));
  for (int64_t i = 0; i < out; ++i) {
    float acc = 0.0f;
    for (int64_t j = 0; j < in; ++j) acc += w[i * in + j] * x[j];
    y[static_cast<size_t>(i)] = acc + b[i];
  }
  return Tensor(TensorShape{out}, y);
}

// Same-padded stride-1 cross-correlation written as six plain loops.
Tensor naive_conv_same(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  const int64_t F = w.shape()[0], KH = w.shape()[1], KW = w.shape()[2];
  const int64_t ph = (KH - 1) / 2, pw = (KW - 1) / 2;
  Tensor y(TensorShape{H, W, F});
  auto out = y.mutable_data();
  for (int64_t oy = 0; oy < H; ++oy)
    for (int64_t ox = 0; ox < W; ++ox)
      for (int64_t f = 0; f < F; ++f) {
        float acc = 0.0f;
        for (int64_t ky = 0; ky < KH; ++ky)
          for (int64_t kx = 0; kx < KW; ++kx)
            for (int64_t c = 0; c < C; ++c) {
              const int64_t iy = oy + ky - ph, ix = ox + kx - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += w[((f * KH + ky) * KW + kx) * C + c] * x[(iy * W + ix) * C + c];
            }
        out[static_cast<size_t>((oy * W + ox) * F + f)] = acc + b[f];
      }
  return y;
}

LayerParams fc_params(int64_t out, int64_t in, std::mt19937& rng) {
  LayerParams p;
  p.weights = random_tensor(TensorShape{out, in}, rng);
  p.bias = random_tensor(TensorShape{out}, rng);
  return p;
}

}  // namespace

TEST(ForwardFc, IdentityWeights) {
  LayerParams p;
  p.weights = Tensor(TensorShape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  p.bias = Tensor(TensorShape{3});
  Tensor y = forward_fc(Tensor(TensorShape{3}, {1, 2, 3}), p);
  EXPECT_EQ(y, Tensor(TensorShape{3}, {1, 2, 3}));
}

TEST(ForwardFc, ZeroInputGivesBias) {
  std::mt19937 rng(1);
  LayerParams p = fc_params(5, 7, rng);
  EXPECT_EQ(forward_fc(Tensor(TensorShape{7}), p), p.bias);
}

TEST(ForwardFc, MatchesScalarLoopOracle) {
  std::mt19937 rng(2);
  LayerParams p = fc_params(8, 4, rng);
  Tensor x = random_tensor(TensorShape{4}, rng);
  EXPECT_EQ(forward_fc(x, p), naive_fc(x, p.weights, p.bias));
  LayerParams big = fc_params(300, 700, rng);
  Tensor xb = random_tensor(TensorShape{700}, rng);
  EXPECT_EQ(forward_fc(xb, big), naive_fc(xb, big.weights, big.bias));
}

TEST(ForwardFc, DimensionMismatch) {
  std::mt19937 rng(3);
  EXPECT_THROW(forward_fc(Tensor(TensorShape{5}), fc_params(2, 4, rng)), ShapeError);
}

TEST(ForwardConv, OneByOneOnesFilterIsIdentity) {
  std::mt19937 rng(4);
  Tensor x = random_tensor(TensorShape{6, 5, 1}, rng);
  LayerParams p;
  p.weights = Tensor(TensorShape{1, 1, 1, 1}, {1.0f});
  p.bias = Tensor(TensorShape{1});
  EXPECT_EQ(forward_conv(x, p, Conv2D{1, 1, 1, 1, Padding::Same}), x);
}

TEST(ForwardConv, ZeroInputBroadcastsBias) {
  std::mt19937 rng(5);
  LayerParams p;
  p.weights = random_tensor(TensorShape{4, 3, 3, 2}, rng);
  p.bias = random_tensor(TensorShape{4}, rng);
  Tensor y = forward_conv(Tensor(TensorShape{5, 5, 2}), p, Conv2D{4, 3, 3, 1, Padding::Same});
  for (int64_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], p.bias[i % 4]);
}

TEST(ForwardConv, FiveByFiveMatchesNaiveOracle) {
  std::mt19937 rng(6);
  Tensor x = random_tensor(TensorShape{16, 12, 3}, rng);
  LayerParams p;
  p.weights = random_tensor(TensorShape{8, 5, 5, 3}, rng);
  p.bias = random_tensor(TensorShape{8}, rng);
  EXPECT_EQ(forward_conv(x, p, Conv2D{8, 5, 5, 1, Padding::Same}), naive_conv_same(x, p.weights, p.bias));
}

TEST(ForwardConv, FilterSliceEqualsChannelSlice) {
  std::mt19937 rng(7);
  Tensor x = random_tensor(TensorShape{7, 9, 4}, rng);
  LayerParams p;
  p.weights = random_tensor(TensorShape{6, 3, 3, 4}, rng);
  p.bias = random_tensor(TensorShape{6}, rng);
  const Conv2D spec{6, 3, 3, 1, Padding::Same};
  Tensor full = forward_conv(x, p, spec);
  Tensor a = forward_conv(x, slice_params(p, 0, 4), spec);
  Tensor b = forward_conv(x, slice_params(p, 4, 6), spec);
  std::vector<Tensor> parts{a, b};
  EXPECT_EQ(forward_concat(parts, 2), full);
}

TEST(Kernels, SerialAndParallelAgree) {
  std::mt19937 rng(8);
  LayerParams p = fc_params(257, 513, rng);
  Tensor x = random_tensor(TensorShape{513}, rng);
  std::vector<float> a(257), b(257);
  kernels::fc_serial(p.weights.data().data(), p.bias.data().data(), x.data().data(), 513, 257, a.data());
  kernels::fc_parallel(p.weights.data().data(), p.bias.data().data(), x.data().data(), 513, 257, b.data());
  EXPECT_EQ(a, b);

  Tensor img = random_tensor(TensorShape{11, 13, 3}, rng);
  Tensor w = random_tensor(TensorShape{5, 3, 3, 3}, rng);
  Tensor bias = random_tensor(TensorShape{5}, rng);
  kernels::ConvGeometry g{11, 13, 3, 3, 3, 2, 1, 1, 6, 7, 5};
  std::vector<float> c(6 * 7 * 5), d(6 * 7 * 5);
  kernels::conv_serial(g, w.data().data(), bias.data().data(), img.data().data(), c.data());
  kernels::conv_parallel(g, w.data().data(), bias.data().data(), img.data().data(), d.data());
  EXPECT_EQ(c, d);
}

TEST(Pointwise, BatchNormStandardParamsIsNearIdentity) {
  std::mt19937 rng(9);
  Tensor x = random_tensor(TensorShape{4, 4, 3}, rng);
  LayerParams p;
  p.mean = Tensor(TensorShape{3});
  p.var = Tensor(TensorShape{3}, {1, 1, 1});
  p.gamma = Tensor(TensorShape{3}, {1, 1, 1});
  p.beta = Tensor(TensorShape{3});
  Tensor y = forward_batchnorm(x, p);
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(y[i] - x[i]), 1e-5 * std::abs(x[i]) + 1e-7);
}

TEST(Pointwise, BatchNormRejectsNonPositiveVariance) {
  LayerParams p;
  p.mean = Tensor(TensorShape{1});
  p.var = Tensor(TensorShape{1});
  p.gamma = Tensor(TensorShape{1}, {1});
  p.beta = Tensor(TensorShape{1});
  EXPECT_THROW(forward_batchnorm(Tensor(TensorShape{2, 2, 1}), p), Error);
}

TEST(Pointwise, SoftmaxUniform) {
  Tensor y = forward_softmax(Tensor(TensorShape{51}, std::vector<float>(51, 0.3f)));
  for (int64_t i = 0; i < 51; ++i) EXPECT_FLOAT_EQ(y[i], 1.0f / 51.0f);
}

TEST(Pointwise, SoftmaxNormalizesBoundedInputs) {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor(TensorShape{1 + trial % 97}, rng, -100.0f, 100.0f);
    Tensor y = forward_softmax(x);
    double sum = 0.0;
    for (float v : y.data()) sum += v;
    EXPECT_LE(std::abs(sum - 1.0), 1e-6);
  }
}

TEST(Pointwise, MaxPoolAndRelu) {
  Tensor x(TensorShape{2, 2, 1}, {1, 2, 3, 4});
  EXPECT_EQ(forward_maxpool(x, MaxPool{2, 2}), Tensor(TensorShape{1, 1, 1}, {4}));
  EXPECT_THROW(forward_maxpool(x, MaxPool{3, 1}), ShapeError);
  EXPECT_EQ(forward_relu(Tensor(TensorShape{3}, {-1, 0, 2})), Tensor(TensorShape{3}, {0, 0, 2}));
}

TEST(TemporalPyramid, ConstantSequence) {
  Tensor f(TensorShape{4}, {1, -2, 3, 0.5f});
  std::vector<Tensor> frames(9, f);
  Tensor y = temporal_pyramid(frames, 4);
  ASSERT_EQ(y.shape(), (TensorShape{15, 4}));
  for (int64_t r = 0; r < 15; ++r)
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(y[r * 4 + j], f[j]);
}

TEST(TemporalPyramid, SingleFrameCollapses) {
  std::mt19937 rng(11);
  std::vector<Tensor> frames{random_tensor(TensorShape{6}, rng)};
  Tensor y = temporal_pyramid(frames, 4);
  for (int64_t r = 0; r < 15; ++r)
    for (int64_t j = 0; j < 6; ++j) EXPECT_EQ(y[r * 6 + j], frames[0][j]);
}

TEST(TemporalPyramid, EightFramesMatchRangeMax) {
  std::mt19937 rng(12);
  std::vector<Tensor> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(random_tensor(TensorShape{5}, rng));
  Tensor y = temporal_pyramid(frames, 4);
  // With 8 frames the level-3 ranges are single frames and level-2 pairs.
  for (int64_t j = 0; j < 5; ++j) {
    float all = frames[0][j];
    for (const auto& f : frames) all = std::max(all, f[j]);
    EXPECT_EQ(y[j], all);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(y[(7 + i) * 5 + j], frames[static_cast<size_t>(i)][j]);
    EXPECT_EQ(y[3 * 5 + j], std::max(frames[0][j], frames[1][j]));
  }
}

TEST(TemporalPyramid, FirstRowDominatesAndEmptyRejected) {
  std::mt19937 rng(13);
  std::vector<Tensor> frames;
  for (int i = 0; i < 13; ++i) frames.push_back(random_tensor(TensorShape{7}, rng));
  Tensor y = temporal_pyramid(frames, 4);
  for (int64_t r = 1; r < 15; ++r)
    for (int64_t j = 0; j < 7; ++j) EXPECT_GE(y[j], y[r * 7 + j]);
  EXPECT_THROW(temporal_pyramid(std::vector<Tensor>{}, 4), Error);
}

TEST(FlowStack, IdenticalFramesGiveZeroFlow) {
  std::mt19937 rng(14);
  std::vector<Tensor> frames(11, random_tensor(TensorShape{16, 12, 3}, rng));
  Tensor y = flow_stack(frames, 10);
  EXPECT_EQ(y.shape(), (TensorShape{16, 12, 20}));
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(FlowStack, ShiftedFrameMatchesDifference) {
  Tensor a(TensorShape{1, 4, 1}, {0, 1, 0, 0});
  Tensor b(TensorShape{1, 4, 1}, {0, 0, 1, 0});
  std::vector<Tensor> frames{a, b};
  Tensor y = flow_stack(frames, 1);
  EXPECT_EQ(y, Tensor(TensorShape{1, 4, 2}, {0, 0, -1, -1, 1, 1, 0, 0}));
}

TEST(FlowStack, Errors) {
  std::vector<Tensor> wrong_count(3, Tensor(TensorShape{2, 2, 1}));
  EXPECT_THROW(flow_stack(wrong_count, 10), Error);
  std::vector<Tensor> mixed{Tensor(TensorShape{2, 2, 1}), Tensor(TensorShape{2, 3, 1})};
  EXPECT_THROW(flow_stack(mixed, 1), ShapeError);
}

TEST(Params, DeterministicAndBounded) {
  ModelGraph g = build_model("two_stream", {.scale = 0.125});
  const int fc = g.index_of("fc_1");
  LayerParams a = generate_params(g, fc), b = generate_params(g, fc);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.weights.shape(), (TensorShape{1024, 960}));
  for (float v : a.weights.data()) EXPECT_LE(std::abs(v), 0.05f);
  LayerParams bn = generate_params(g, g.index_of("s_bn1"));
  for (float v : bn.var.data()) EXPECT_GT(v, 0.0f);
  EXPECT_TRUE(generate_params(g, g.index_of("s_relu1")).empty());
}

TEST(RunReference, TwoStreamClipGivesDistributions) {
  ModelGraph g = build_model("two_stream", {.scale = 0.125});
  auto inputs = seeded_inputs(g, 30, 1);
  auto out = run_reference_stream(g, inputs);
  ASSERT_EQ(out.size(), 6u);
  EXPECT_EQ(out.begin()->first, 24);
  for (const auto& [tag, tensors] : out) {
    const Tensor& y = tensors.at("output");
    ASSERT_EQ(y.size(), 51);
    double sum = 0.0;
    for (float v : y.data()) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-6) << tag;
  }
  EXPECT_EQ(run_reference_stream(g, inputs), out);
}

TEST(RunReference, SingleReluOnNegativeInput) {
  ModelGraph g("relu_only", 1);
  g.add(LayerSpec{"in", Source{TensorShape{3}}, {}, 0});
  g.add(LayerSpec{"r", ReLU{}, {"in"}, 0});
  g.add(LayerSpec{"out", Sink{}, {"r"}, 0});
  g = validate_graph(g);
  auto y = run_reference(g, {{"in", Tensor(TensorShape{3}, {-1, -2, -3})}});
  EXPECT_EQ(y.at("out"), Tensor(TensorShape{3}));
}

TEST(RunReference, MissingInputRejected) {
  ModelGraph g = build_model("alexnet", {.scale = 0.125});
  EXPECT_THROW(run_reference(g, {}), Error);
}
