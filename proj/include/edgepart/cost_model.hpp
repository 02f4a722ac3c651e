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

#ifndef EDGEPART_COST_MODEL_HPP
#define EDGEPART_COST_MODEL_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "edgepart/metrics.hpp"
#include "edgepart/model_ir.hpp"

namespace edgepart {

struct PowerProfile {
  double idle_watts = 1.3;
  double busy_watts = 6.5;
  double observed_watts = 3.0;
};

// Defaults describe a Raspberry-Pi-class board; see README for calibration.
struct DeviceProfile {
  double mem_size = 1e9;
  // Sustained throughput for dense and elementwise work.
  double flops_per_sec = 1.3e8;
  // Convolutions reuse operands from cache and run faster per op.
  double conv_flops_per_sec = 4e8;
  double load_bandwidth = 10e6;
  double setup_seconds = 1.0;
  double swap_threshold = 0.2e9;
  double swap_penalty = 4.0;
  double overhead_factor = 2.0;
  PowerProfile power;

  // Throws Error when a field is out of range.
  void validate() const;
};

struct CommModel {
  double per_kb_seconds = 0.0002;
  double base_seconds = 0.002;
};

struct Profiles {
  DeviceProfile device;
  CommModel comm;
};

nlohmann::json profiles_to_json(const Profiles& p);
// Missing fields keep their defaults.
Profiles profiles_from_json(const nlohmann::json& doc);

// One layer, or its output rows part_rows(out, part, count) when count > 1.
struct LayerSlice {
  int layer = 0;
  int64_t part = 0;
  int64_t count = 1;
  friend bool operator==(const LayerSlice&, const LayerSlice&) = default;
};

// Output row range owned by a part.
std::pair<int64_t, int64_t> part_rows(int64_t out, int64_t part, int64_t count);

struct LayerCost {
  double ops = 0.0;
  bool conv = false;
  int64_t params = 0;
  int64_t in_bytes = 0;
  int64_t out_bytes = 0;
};

LayerCost layer_cost(const ModelGraph& graph, const LayerSlice& slice);

struct CostEstimate {
  double compute_seconds = 0.0;
  double memory_bytes = 0.0;
  double load_seconds = 0.0;
  int64_t comm_in_bytes = 0;
  int64_t comm_out_bytes = 0;
};

// Parameter bytes times overhead_factor plus the largest per-layer
// input+output activation footprint.
double estimate_memory(const ModelGraph& graph, std::span<const LayerSlice> task, double overhead_factor);
double estimate_compute(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device);
double estimate_load_time(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device);
double comm_latency(int64_t bytes, const CommModel& model);
// Bytes entering the task from layers outside it, and leaving it to them.
CostEstimate estimate_task(const ModelGraph& graph, std::span<const LayerSlice> task, const DeviceProfile& device);

// Whole layers by index.
std::vector<LayerSlice> whole_layers(std::span<const int> layers);

struct EnergyReport {
  double static_joules = 0.0;
  double dynamic_joules = 0.0;
  double total() const { return static_joules + dynamic_joules; }
};

// Static: idle power of every device over the wall time. Dynamic: power
// above idle while busy. Device i uses devices[i], or the last entry.
EnergyReport energy(const RunMetrics& metrics, std::span<const DeviceProfile> devices);

}  // namespace edgepart

#endif  // EDGEPART_COST_MODEL_HPP
