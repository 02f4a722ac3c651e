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

#include "edgepart/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "edgepart/error.hpp"
#include "edgepart/kernels.hpp"

namespace edgepart {

namespace {

class UniformStream {
 public:
  explicit UniformStream(uint64_t seed) : rng_(seed) {}
  // [0, 1) with 24 bits of mantissa, identical on every platform.
  float next01() { return static_cast<float>(rng_() >> 40) * 0x1.0p-24f; }
  float symmetric(float half_width) { return (next01() * 2.0f - 1.0f) * half_width; }

 private:
  std::mt19937_64 rng_;
};

Tensor filled(TensorShape shape, UniformStream& rng, float offset, float half_width) {
  Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) v = offset + rng.symmetric(half_width);
  return t;
}

Tensor slice_rows(const Tensor& t, int64_t begin, int64_t end) {
  if (t.size() == 0) return t;
  const int64_t rows = t.shape()[0];
  if (begin < 0 || end > rows || begin >= end) {
    throw Error("row slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                t.shape().to_string());
  }
  const int64_t row_size = t.size() / rows;
  std::vector<int64_t> dims = t.shape().dims();
  dims[0] = end - begin;
  auto data = t.data().subspan(static_cast<size_t>(begin * row_size), static_cast<size_t>((end - begin) * row_size));
  return Tensor(TensorShape(std::move(dims)), std::vector<float>(data.begin(), data.end()));
}

const Tensor& single_input(const LayerSpec& layer, std::span<const Tensor> inputs) {
  if (inputs.size() != 1) {
    throw ShapeError("layer '" + layer.name + "' expects 1 input, got " + std::to_string(inputs.size()));
  }
  return inputs[0];
}

}  // namespace

int64_t LayerParams::count() const {
  return weights.size() + bias.size() + mean.size() + var.size() + gamma.size() + beta.size();
}

LayerParams generate_params(const ModelGraph& graph, int layer_index) {
  const LayerSpec& layer = graph.layer(layer_index);
  LayerParams p;
  if (!has_weights(layer)) return p;
  const TensorShape& in = graph.shape(graph.input_indices(layer_index).at(0));
  UniformStream rng(layer.weights_seed);
  if (layer.is<FullyConnected>()) {
    const int64_t out = layer.as<FullyConnected>().out_size;
    p.weights = filled(TensorShape{out, in.elements()}, rng, 0.0f, 0.05f);
    p.bias = filled(TensorShape{out}, rng, 0.0f, 0.05f);
  } else if (layer.is<Conv2D>()) {
    const Conv2D& c = layer.as<Conv2D>();
    p.weights = filled(TensorShape{c.filters, c.kernel_h, c.kernel_w, in[in.rank() - 1]}, rng, 0.0f, 0.05f);
    p.bias = filled(TensorShape{c.filters}, rng, 0.0f, 0.05f);
  } else {
    const TensorShape channels{in[in.rank() - 1]};
    p.mean = filled(channels, rng, 0.0f, 0.05f);
    p.var = filled(channels, rng, 1.0f, 0.5f);
    p.gamma = filled(channels, rng, 1.0f, 0.05f);
    p.beta = filled(channels, rng, 0.0f, 0.05f);
  }
  return p;
}

LayerParams slice_params(const LayerParams& params, int64_t begin, int64_t end) {
  LayerParams p;
  p.weights = slice_rows(params.weights, begin, end);
  p.bias = slice_rows(params.bias, begin, end);
  p.mean = slice_rows(params.mean, begin, end);
  p.var = slice_rows(params.var, begin, end);
  p.gamma = slice_rows(params.gamma, begin, end);
  p.beta = slice_rows(params.beta, begin, end);
  return p;
}

Tensor forward_fc(const Tensor& input, const LayerParams& params) {
  const TensorShape& ws = params.weights.shape();
  if (ws.rank() != 2 || ws[1] != input.size() || params.bias.size() != ws[0]) {
    throw ShapeError("fc weights " + ws.to_string() + " do not fit input " + input.shape().to_string());
  }
  Tensor out(TensorShape{ws[0]});
  kernels::fc_parallel(params.weights.data().data(), params.bias.data().data(), input.data().data(), ws[1], ws[0],
                       out.mutable_data().data());
  return out;
}

Tensor forward_conv(const Tensor& input, const LayerParams& params, const Conv2D& spec) {
  const TensorShape& s = input.shape();
  const TensorShape& ws = params.weights.shape();
  if (s.rank() != 3 || ws.rank() != 4 || ws[1] != spec.kernel_h || ws[2] != spec.kernel_w || ws[3] != s[2] ||
      params.bias.size() != ws[0]) {
    throw ShapeError("conv weights " + ws.to_string() + " do not fit input " + s.to_string());
  }
  kernels::ConvGeometry g{};
  g.in_h = s[0];
  g.in_w = s[1];
  g.in_c = s[2];
  g.kernel_h = spec.kernel_h;
  g.kernel_w = spec.kernel_w;
  g.stride = spec.stride;
  g.filters = ws[0];
  if (spec.padding == Padding::Same) {
    g.out_h = (s[0] - 1) / spec.stride + 1;
    g.out_w = (s[1] - 1) / spec.stride + 1;
    g.pad_top = std::max<int64_t>((g.out_h - 1) * spec.stride + spec.kernel_h - s[0], 0) / 2;
    g.pad_left = std::max<int64_t>((g.out_w - 1) * spec.stride + spec.kernel_w - s[1], 0) / 2;
  } else {
    if (spec.kernel_h > s[0] || spec.kernel_w > s[1]) throw ShapeError("conv kernel larger than input " + s.to_string());
    g.out_h = (s[0] - spec.kernel_h) / spec.stride + 1;
    g.out_w = (s[1] - spec.kernel_w) / spec.stride + 1;
    g.pad_top = g.pad_left = 0;
  }
  Tensor out(TensorShape{g.out_h, g.out_w, g.filters});
  kernels::conv_parallel(g, params.weights.data().data(), params.bias.data().data(), input.data().data(),
                         out.mutable_data().data());
  return out;
}

Tensor forward_relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.mutable_data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor forward_batchnorm(const Tensor& input, const LayerParams& params) {
  const int64_t channels = input.shape()[input.shape().rank() - 1];
  if (params.mean.size() != channels || params.var.size() != channels || params.gamma.size() != channels ||
      params.beta.size() != channels) {
    throw ShapeError("batchnorm params do not match " + std::to_string(channels) + " channels");
  }
  for (float v : params.var.data()) {
    if (!(v > 0.0f)) throw Error("batchnorm variance must be positive");
  }
  Tensor out = input;
  auto data = out.mutable_data();
  for (int64_t i = 0; i < out.size(); ++i) {
    const int64_t c = i % channels;
    const float x = data[static_cast<size_t>(i)];
    data[static_cast<size_t>(i)] =
        params.gamma[c] * (x - params.mean[c]) / std::sqrt(params.var[c] + kBatchNormEpsilon) + params.beta[c];
  }
  return out;
}

Tensor forward_softmax(const Tensor& input) {
  Tensor out = input;
  auto data = out.mutable_data();
  if (data.empty()) return out;
  const float peak = *std::max_element(data.begin(), data.end());
  double sum = 0.0;
  std::vector<double> e(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    e[i] = std::exp(static_cast<double>(data[i]) - static_cast<double>(peak));
    sum += e[i];
  }
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(e[i] / sum);
  return out;
}

Tensor forward_maxpool(const Tensor& input, const MaxPool& spec) {
  const TensorShape& s = input.shape();
  if (s.rank() != 3) throw ShapeError("maxpool expects rank-3 input, got " + s.to_string());
  if (spec.window > s[0] || spec.window > s[1]) throw ShapeError("maxpool window exceeds input " + s.to_string());
  const int64_t oh = (s[0] - spec.window) / spec.stride + 1;
  const int64_t ow = (s[1] - spec.window) / spec.stride + 1;
  const int64_t c = s[2];
  Tensor out(TensorShape{oh, ow, c});
  auto o = out.mutable_data();
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      for (int64_t ch = 0; ch < c; ++ch) {
        float best = -std::numeric_limits<float>::infinity();
        for (int64_t dy = 0; dy < spec.window; ++dy) {
          for (int64_t dx = 0; dx < spec.window; ++dx) {
            best = std::max(best, input[((y * spec.stride + dy) * s[1] + (x * spec.stride + dx)) * c + ch]);
          }
        }
        o[static_cast<size_t>((y * ow + x) * c + ch)] = best;
      }
    }
  }
  return out;
}

Tensor forward_concat(std::span<const Tensor> inputs, int64_t axis) {
  if (inputs.empty()) throw ShapeError("concat of nothing");
  std::vector<TensorShape> shapes;
  for (const auto& t : inputs) shapes.push_back(t.shape());
  LayerSpec probe{"concat", Concat{axis}, {}, 0};
  TensorShape out_shape = infer_shape(probe, shapes);
  int64_t outer = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= out_shape[static_cast<size_t>(d)];
  std::vector<float> out;
  out.reserve(static_cast<size_t>(out_shape.elements()));
  for (int64_t o = 0; o < outer; ++o) {
    for (const auto& t : inputs) {
      const int64_t chunk = t.size() / outer;
      auto part = t.data().subspan(static_cast<size_t>(o * chunk), static_cast<size_t>(chunk));
      out.insert(out.end(), part.begin(), part.end());
    }
  }
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor temporal_pyramid(std::span<const Tensor> frames, int levels) {
  if (frames.empty()) throw Error("temporal pyramid over an empty frame list");
  if (levels < 1) throw Error("temporal pyramid needs at least one level");
  const int64_t n = static_cast<int64_t>(frames.size());
  const int64_t d = frames[0].size();
  for (const auto& f : frames) {
    if (f.size() != d) throw ShapeError("temporal pyramid frames differ in size");
  }
  const int64_t rows = (int64_t{1} << levels) - 1;
  Tensor out(TensorShape{rows, d});
  auto o = out.mutable_data();
  int64_t row = 0;
  for (int k = 0; k < levels; ++k) {
    const int64_t ranges = int64_t{1} << k;
    const int64_t base = n / ranges;
    const int64_t rem = n % ranges;
    for (int64_t r = 0; r < ranges; ++r, ++row) {
      int64_t begin = r * base + std::min(r, rem);
      int64_t len = base + (r < rem ? 1 : 0);
      if (len == 0) {
        begin = std::min(begin, n - 1);
        len = 1;
      }
      float* dst = o.data() + row * d;
      for (int64_t j = 0; j < d; ++j) dst[j] = frames[static_cast<size_t>(begin)][j];
      for (int64_t f = begin + 1; f < begin + len; ++f) {
        for (int64_t j = 0; j < d; ++j) dst[j] = std::max(dst[j], frames[static_cast<size_t>(f)][j]);
      }
    }
  }
  return out;
}

Tensor difference_flow(const Tensor& prev, const Tensor& next) {
  const TensorShape& s = prev.shape();
  if (s.rank() != 3 || !(s == next.shape())) {
    throw ShapeError("flow frames differ: " + s.to_string() + " vs " + next.shape().to_string());
  }
  const int64_t pixels = s[0] * s[1];
  const int64_t c = s[2];
  Tensor out(TensorShape{s[0], s[1], 2});
  auto o = out.mutable_data();
  for (int64_t p = 0; p < pixels; ++p) {
    float a = 0.0f, b = 0.0f;
    for (int64_t ch = 0; ch < c; ++ch) {
      a += prev[p * c + ch];
      b += next[p * c + ch];
    }
    const float diff = b / static_cast<float>(c) - a / static_cast<float>(c);
    o[static_cast<size_t>(2 * p)] = diff;
    o[static_cast<size_t>(2 * p + 1)] = diff;
  }
  return out;
}

Tensor flow_stack(std::span<const Tensor> frames, int window_len, const FlowFn& flow) {
  if (window_len < 1) throw Error("flow window_len must be >= 1");
  if (static_cast<int64_t>(frames.size()) != window_len + 1) {
    throw Error("flow stack needs " + std::to_string(window_len + 1) + " frames, got " +
                std::to_string(frames.size()));
  }
  const TensorShape& s = frames[0].shape();
  for (const auto& f : frames) {
    if (!(f.shape() == s)) throw ShapeError("flow stack frames differ in shape");
  }
  if (s.rank() != 3) throw ShapeError("flow stack expects rank-3 frames");
  const int64_t pixels = s[0] * s[1];
  const int64_t channels = 2 * static_cast<int64_t>(window_len);
  Tensor out(TensorShape{s[0], s[1], channels});
  auto o = out.mutable_data();
  for (int pair = 0; pair < window_len; ++pair) {
    Tensor field = flow(frames[static_cast<size_t>(pair)], frames[static_cast<size_t>(pair) + 1]);
    if (field.size() != pixels * 2) throw ShapeError("flow function returned " + field.shape().to_string());
    for (int64_t p = 0; p < pixels; ++p) {
      o[static_cast<size_t>(p * channels + 2 * pair)] = field[2 * p];
      o[static_cast<size_t>(p * channels + 2 * pair + 1)] = field[2 * p + 1];
    }
  }
  return out;
}

Tensor forward_layer(const LayerSpec& layer, const LayerParams& params, std::span<const Tensor> inputs) {
  try {
    if (layer.is<FullyConnected>()) return forward_fc(single_input(layer, inputs), params);
    if (layer.is<Conv2D>()) return forward_conv(single_input(layer, inputs), params, layer.as<Conv2D>());
    if (layer.is<ReLU>()) return forward_relu(single_input(layer, inputs));
    if (layer.is<BatchNorm>()) return forward_batchnorm(single_input(layer, inputs), params);
    if (layer.is<Softmax>()) return forward_softmax(single_input(layer, inputs));
    if (layer.is<MaxPool>()) return forward_maxpool(single_input(layer, inputs), layer.as<MaxPool>());
    if (layer.is<Sink>() || layer.is<Source>()) return single_input(layer, inputs);
    if (layer.is<Concat>()) return forward_concat(inputs, layer.as<Concat>().axis);
    if (layer.is<TemporalPyramid>()) return temporal_pyramid(inputs, layer.as<TemporalPyramid>().levels);
    return flow_stack(inputs, layer.as<FlowStack>().window_len);
  } catch (const ShapeError& e) {
    throw ShapeError("layer '" + layer.name + "': " + e.what());
  }
}

std::map<int64_t, TensorMap> run_reference_stream(const ModelGraph& graph,
                                                  const std::map<std::string, std::vector<Tensor>>& inputs,
                                                  std::map<int64_t, TensorMap>* trace) {
  if (!graph.validated()) throw GraphError("graph must be validated before execution");
  const int n = static_cast<int>(graph.size());
  int64_t items = -1;
  for (const auto& src : graph.inputs()) {
    auto it = inputs.find(src);
    if (it == inputs.end()) throw Error("missing input for source '" + src + "'");
    const int64_t count = static_cast<int64_t>(it->second.size());
    items = items < 0 ? count : std::min(items, count);
  }

  std::vector<LayerParams> params(static_cast<size_t>(n));
  std::vector<int64_t> keep(static_cast<size_t>(n), 1);
  for (int i = 0; i < n; ++i) {
    params[static_cast<size_t>(i)] = generate_params(graph, i);
    for (int c : graph.consumers(i)) {
      keep[static_cast<size_t>(i)] = std::max<int64_t>(keep[static_cast<size_t>(i)], input_window(graph.layer(c)));
    }
  }

  int64_t output_from = 0;
  for (const auto& out : graph.outputs()) output_from = std::max(output_from, graph.first_tag(graph.index_of(out)));

  std::vector<std::map<int64_t, Tensor>> history(static_cast<size_t>(n));
  std::map<int64_t, TensorMap> results;
  for (int64_t t = 0; t < items; ++t) {
    for (int i : graph.topo_order()) {
      const LayerSpec& layer = graph.layer(i);
      if (t < graph.first_tag(i)) continue;
      Tensor value;
      if (layer.is<Source>()) {
        value = inputs.at(layer.name)[static_cast<size_t>(t)];
        if (!(value.shape() == graph.shape(i))) {
          throw ShapeError("input '" + layer.name + "' has shape " + value.shape().to_string() + ", expected " +
                           graph.shape(i).to_string());
        }
      } else {
        std::vector<Tensor> in;
        const auto producers = graph.input_indices(i);
        if (is_windowed(layer)) {
          const int w = input_window(layer);
          for (int64_t u = t - w + 1; u <= t; ++u) in.push_back(history[static_cast<size_t>(producers[0])].at(u));
        } else {
          for (int p : producers) in.push_back(history[static_cast<size_t>(p)].at(t));
        }
        value = forward_layer(layer, params[static_cast<size_t>(i)], in);
      }
      if (trace) (*trace)[t][layer.name] = value;
      history[static_cast<size_t>(i)][t] = std::move(value);
    }
    if (t >= output_from) {
      TensorMap outs;
      for (const auto& out : graph.outputs()) outs[out] = history[static_cast<size_t>(graph.index_of(out))].at(t);
      results[t] = std::move(outs);
    }
    for (int i = 0; i < n; ++i) {
      auto& h = history[static_cast<size_t>(i)];
      while (!h.empty() && h.begin()->first <= t - keep[static_cast<size_t>(i)]) h.erase(h.begin());
    }
  }
  return results;
}

TensorMap run_reference(const ModelGraph& graph, const TensorMap& inputs) {
  for (const auto& layer : graph.layers()) {
    if (input_window(layer) > 1) {
      throw Error("layer '" + layer.name + "' is windowed; use run_reference_stream for item sequences");
    }
  }
  std::map<std::string, std::vector<Tensor>> stream;
  for (const auto& [name, t] : inputs) stream[name] = {t};
  auto results = run_reference_stream(graph, stream);
  if (results.empty()) return {};
  return results.begin()->second;
}

std::map<std::string, std::vector<Tensor>> seeded_inputs(const ModelGraph& graph, int64_t items, uint64_t seed) {
  std::map<std::string, std::vector<Tensor>> out;
  uint64_t salt = 0;
  for (const auto& src : graph.inputs()) {
    UniformStream rng(seed * 0x9e3779b97f4a7c15ULL + (++salt));
    auto& seq = out[src];
    for (int64_t t = 0; t < items; ++t) {
      Tensor frame(graph.shape(src));
      for (float& v : frame.mutable_data()) v = rng.next01();
      seq.push_back(std::move(frame));
    }
  }
  return out;
}

}  // namespace edgepart
