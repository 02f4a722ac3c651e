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

#ifndef EDGEPART_HARNESS_HPP
#define EDGEPART_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edgepart/cost_model.hpp"
#include "edgepart/metrics.hpp"
#include "edgepart/model_ir.hpp"
#include "edgepart/partitioner.hpp"
#include "edgepart/runtime/transport.hpp"

namespace edgepart {

// Plans are made on the graph at plan_scale and executed on the graph at
// scale, so desk-sized runs follow full-size architectures.
struct Workload {
  std::string model = "two_stream";
  double scale = 0.125;
  double plan_scale = 1.0;
  Profiles profiles;
};

struct PlannedWorkload {
  ModelGraph plan_graph;
  ModelGraph exec_graph;
  AssignmentSet plan_set;  // over plan_graph
  AssignmentSet exec_set;  // same structure, over exec_graph
};

PlannedWorkload plan_workload(const Workload& w, int n_max);
// Rebinds a saved plan file to the workload's execution graph.
PlannedWorkload load_workload(const Workload& w, const nlohmann::json& plan_doc);

struct Mismatch {
  int64_t tag = -1;
  std::string layer;
  double diff = 0.0;
};

struct VerifyCase {
  int n = 0;
  int64_t outputs = 0;
  double max_diff = 0.0;
  bool ok = false;
  std::optional<Mismatch> first_mismatch;
  std::string error;
};

struct VerifyOptions {
  std::vector<int> n_list;
  uint64_t seed = 1;
  int64_t frames = 0;  // 0: enough for a few outputs
  TransportKind transport = TransportKind::InProcess;
  int corrupt_device = -1;  // test hook, device index within each run
};

struct VerifyReport {
  std::string model;
  std::vector<VerifyCase> cases;
  bool ok() const;
};

VerifyReport verify(const Workload& w, const VerifyOptions& options);
int64_t default_frames(const ModelGraph& graph);

struct BenchRow {
  int n = 0;
  RunMetrics metrics;
  double predicted_ips = 0.0;
  EnergyReport energy;  // per inference
  std::string plan;
};

struct BenchReport {
  std::string model;
  int64_t items = 0;
  double fps = 0.0;
  std::vector<BenchRow> rows;
  std::vector<std::string> notes;
};

// Discrete-event runs of each plan with cost-model durations.
BenchReport bench(const Workload& w, const std::vector<int>& n_list, int64_t items, double fps);

EnergyReport energy_per_inference(const RunMetrics& m, const DeviceProfile& device);

std::string plan_dump(const ModelGraph& graph, const AssignmentSet& set, const std::vector<int>& n_list);

struct KernelTiming {
  std::string kernel;
  double flops = 0.0;
  double serial_seconds = 0.0;
  double parallel_seconds = 0.0;
};

struct ProfileReport {
  std::vector<KernelTiming> kernels;
  Profiles calibrated;
};

// Times the dense and convolution kernels and derives throughput figures.
ProfileReport profile_kernels(const Profiles& base, int repeats = 3);

nlohmann::json to_json(const VerifyReport& r);
nlohmann::json to_json(const BenchReport& r);
nlohmann::json to_json(const ProfileReport& r);
nlohmann::json to_json(const RunMetrics& m);

std::string format_verify(const VerifyReport& r);
std::string format_bench(const BenchReport& r);
std::string format_profile(const ProfileReport& r);

// "<dir>/<kind>-<model>-<YYYYmmdd-HHMMSS>.json"; creates dir.
std::string report_path(const std::string& dir, const std::string& kind, const std::string& model);

}  // namespace edgepart

#endif  // EDGEPART_HARNESS_HPP
