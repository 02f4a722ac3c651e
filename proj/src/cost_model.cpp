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

#include "edgepart/cost_model.hpp"

#include <algorithm>
#include <set>

#include "edgepart/error.hpp"

namespace edgepart {

using nlohmann::json;

void DeviceProfile::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(std::string("device profile: ") + name + " must be positive");
  };
  positive(mem_size, "mem_size");
  positive(flops_per_sec, "flops_per_sec");
  positive(conv_flops_per_sec, "conv_flops_per_sec");
  positive(load_bandwidth, "load_bandwidth");
  positive(swap_threshold, "swap_threshold");
  positive(power.idle_watts, "idle_watts");
  if (setup_seconds < 0.0) throw Error("device profile: setup_seconds must be >= 0");
  if (swap_penalty < 1.0) throw Error("device profile: swap_penalty must be >= 1");
  if (overhead_factor < 1.0) throw Error("device profile: overhead_factor must be >= 1");
  if (!(power.idle_watts <= power.observed_watts && power.observed_watts <= power.busy_watts)) {
    throw Error("device profile: expected idle <= observed <= busy watts");
  }
}

json profiles_to_json(const Profiles& p) {
  const DeviceProfile& d = p.device;
  return json{{"device",
               {{"mem_size", d.mem_size},
                {"flops_per_sec", d.flops_per_sec},
                {"conv_flops_per_sec", d.conv_flops_per_sec},
                {"load_bandwidth", d.load_bandwidth},
                {"setup_seconds", d.setup_seconds},
                {"swap_threshold", d.swap_threshold},
                {"swap_penalty", d.swap_penalty},
                {"overhead_factor", d.overhead_factor},
                {"power",
                 {{"idle_watts", d.power.idle_watts},
                  {"busy_watts", d.power.busy_watts},
                  {"observed_watts", d.power.observed_watts}}}}},
              {"comm", {{"per_kb_seconds", p.comm.per_kb_seconds}, {"base_seconds", p.comm.base_seconds}}}};
}

Profiles profiles_from_json(const json& doc) {
  Profiles p;
  try {
    if (doc.contains("device")) {
      const json& d = doc.at("device");
      DeviceProfile& o = p.device;
      o.mem_size = d.value("mem_size", o.mem_size);
      o.flops_per_sec = d.value("flops_per_sec", o.flops_per_sec);
      o.conv_flops_per_sec = d.value("conv_flops_per_sec", o.conv_flops_per_sec);
      o.load_bandwidth = d.value("load_bandwidth", o.load_bandwidth);
      o.setup_seconds = d.value("setup_seconds", o.setup_seconds);
      o.swap_threshold = d.value("swap_threshold", o.swap_threshold);
      o.swap_penalty = d.value("swap_penalty", o.swap_penalty);
      o.overhead_factor = d.value("overhead_factor", o.overhead_factor);
      if (d.contains("power")) {
        const json& w = d.at("power");
        o.power.idle_watts = w.value("idle_watts", o.power.idle_watts);
        o.power.busy_watts = w.value("busy_watts", o.power.busy_watts);
        o.power.observed_watts = w.value("observed_watts", o.power.observed_watts);
      }
    }
    if (doc.contains("comm")) {
      p.comm.per_kb_seconds = doc.at("comm").value("per_kb_seconds", p.comm.per_kb_seconds);
      p.comm.base_seconds = doc.at("comm").value("base_seconds", p.comm.base_seconds);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed profile document: ") + e.what());
  }
  p.device.validate();
  if (p.comm.per_kb_seconds < 0.0 || p.comm.base_seconds < 0.0) throw Error("comm coefficients must be >= 0");
  return p;
}

std::pair<int64_t, int64_t> part_rows(int64_t out, int64_t part, int64_t count) {
  if (count < 1 || part < 0 || part >= count) throw Error("bad part index");
  if (count > out) throw Error("cannot split " + std::to_string(out) + " outputs into " + std::to_string(count));
  const int64_t base = out / count;
  const int64_t rem = out % count;
  const int64_t begin = part * base + std::min(part, rem);
  return {begin, begin + base + (part < rem ? 1 : 0)};
}

LayerCost layer_cost(const ModelGraph& graph, const LayerSlice& slice) {
  if (!graph.validated()) throw GraphError("cost estimates need a validated graph");
  const LayerSpec& layer = graph.layer(slice.layer);
  const TensorShape& out = graph.shape(slice.layer);
  const int64_t out_dim = out[out.rank() - 1];
  double fraction = 1.0;
  int64_t rows = out_dim;
  if (slice.count > 1) {
    auto [b, e] = part_rows(out_dim, slice.part, slice.count);
    rows = e - b;
    fraction = static_cast<double>(rows) / static_cast<double>(out_dim);
  }

  LayerCost c;
  const double out_elems = static_cast<double>(out.elements()) * fraction;
  c.out_bytes = static_cast<int64_t>(out_elems) * 4;
  int64_t in_elems = 0;
  for (int p : graph.input_indices(slice.layer)) in_elems += graph.shape(p).elements();
  c.in_bytes = in_elems * 4 * input_window(layer);

  if (layer.is<FullyConnected>()) {
    c.ops = 2.0 * static_cast<double>(in_elems) * static_cast<double>(rows);
    c.params = (in_elems + 1) * rows;
  } else if (layer.is<Conv2D>()) {
    const Conv2D& k = layer.as<Conv2D>();
    const TensorShape& in = graph.shape(graph.input_indices(slice.layer)[0]);
    const double taps = static_cast<double>(k.kernel_h * k.kernel_w * in[2]);
    c.ops = 2.0 * static_cast<double>(out[0] * out[1]) * static_cast<double>(rows) * taps;
    c.params = (k.kernel_h * k.kernel_w * in[2] + 1) * rows;
    c.conv = true;
  } else if (layer.is<BatchNorm>()) {
    c.ops = 4.0 * out_elems;
    c.params = 4 * rows;
  } else if (layer.is<MaxPool>()) {
    const double w = static_cast<double>(layer.as<MaxPool>().window);
    c.ops = out_elems * w * w;
  } else if (layer.is<TemporalPyramid>()) {
    const auto& p = layer.as<TemporalPyramid>();
    c.ops = static_cast<double>(p.levels) * p.window * static_cast<double>(in_elems);
  } else if (layer.is<FlowStack>()) {
    const TensorShape& in = graph.shape(graph.input_indices(slice.layer)[0]);
    c.ops = out_elems * static_cast<double>(in[2] + 1);
  } else {
    c.ops = out_elems;
  }
  return c;
}

double estimate_memory(const ModelGraph& graph, std::span<const LayerSlice> task, double overhead_factor) {
  if (overhead_factor < 1.0) throw Error("overhead_factor must be >= 1");
  double params = 0.0;
  double peak = 0.0;
  for (const auto& s : task) {
    LayerCost c = layer_cost(graph, s);
    params += static_cast<double>(c.params);
    peak = std::max(peak, static_cast<double>(c.in_bytes + c.out_bytes));
  }
  return params * 4.0 * overhead_factor + peak;
}

double estimate_compute(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device) {
  double seconds = 0.0;
  for (const auto& s : task) {
    LayerCost c = layer_cost(graph, s);
    seconds += c.ops / (c.conv ? device.conv_flops_per_sec : device.flops_per_sec);
  }
  if (estimate_memory(graph, task, 1.0) > device.swap_threshold) seconds *= device.swap_penalty;
  return seconds;
}

double estimate_load_time(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device) {
  double bytes = 0.0;
  for (const auto& s : task) bytes += static_cast<double>(layer_cost(graph, s).params) * 4.0;
  return bytes / device.load_bandwidth + device.setup_seconds;
}

double comm_latency(int64_t bytes, const CommModel& model) {
  if (bytes < 0) throw Error("negative message size");
  return model.base_seconds + model.per_kb_seconds * (static_cast<double>(bytes) / 1000.0);
}

CostEstimate estimate_task(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device) {
  CostEstimate e;
  e.compute_seconds = estimate_compute(graph, task, device);
  e.memory_bytes = estimate_memory(graph, task, device.overhead_factor);
  e.load_seconds = estimate_load_time(graph, task, device);
  std::set<int> inside;
  for (const auto& s : task) inside.insert(s.layer);
  std::set<int> inbound;
  for (const auto& s : task) {
    for (int p : graph.input_indices(s.layer)) {
      if (!inside.contains(p) && inbound.insert(p).second) e.comm_in_bytes += graph.shape(p).bytes();
    }
    bool leaves = std::find(graph.outputs().begin(), graph.outputs().end(), graph.layer(s.layer).name) !=
                  graph.outputs().end();
    for (int c : graph.consumers(s.layer)) leaves = leaves || !inside.contains(c);
    if (leaves) e.comm_out_bytes += layer_cost(graph, s).out_bytes;
  }
  return e;
}

std::vector<LayerSlice> whole_layers(std::span<const int> layers) {
  std::vector<LayerSlice> out;
  for (int l : layers) out.push_back(LayerSlice{l, 0, 1});
  return out;
}

EnergyReport energy(const RunMetrics& metrics, std::span<const DeviceProfile> devices) {
  if (devices.empty() && !metrics.per_device_busy_seconds.empty()) throw Error("energy needs a device profile");
  EnergyReport r;
  for (size_t i = 0; i < metrics.per_device_busy_seconds.size(); ++i) {
    const DeviceProfile& d = devices[std::min(i, devices.size() - 1)];
    const double busy = metrics.per_device_busy_seconds[i];
    if (busy < 0.0 || busy > metrics.wall_seconds * (1.0 + 1e-12)) {
      throw Error("device " + std::to_string(i) + " busy time exceeds wall time");
    }
    r.static_joules += d.power.idle_watts * metrics.wall_seconds;
    r.dynamic_joules += (d.power.observed_watts - d.power.idle_watts) * busy;
  }
  return r;
}

}  // namespace edgepart
