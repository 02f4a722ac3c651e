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

#ifndef EDGEPART_PARTITIONER_HPP
#define EDGEPART_PARTITIONER_HPP

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "edgepart/cost_model.hpp"
#include "edgepart/model_ir.hpp"

namespace edgepart {

// Marks a task as part `part` of `count` of a layer split by output rows.
struct SplitInfo {
  int layer = -1;
  int64_t part = 0;
  int64_t count = 1;
  bool active() const { return layer >= 0; }
  friend bool operator==(const SplitInfo&, const SplitInfo&) = default;
};

struct Task {
  int id = 0;
  // Topological order. Split layers and their glue appear as partial slices.
  std::vector<LayerSlice> layers;
  int replicas = 1;
  SplitInfo split;
  // Resident subsets when the task does not fit in memory at once; weights
  // are swapped between them for every item.
  std::vector<std::vector<LayerSlice>> segments;

  bool reloading() const { return !segments.empty(); }
  bool contains(int layer) const;
};

// One (layer, part) piece flowing from a producer task to a consumer task.
struct Edge {
  int from_task = 0;
  int to_task = 0;
  int layer = 0;
  int64_t part = 0;
  int64_t count = 1;
  int64_t bytes = 0;
};

struct Prediction {
  double ips = 0.0;
  double t_forward = 0.0;
  // Per task, divided by its replica count.
  std::vector<double> stage_seconds;
  double reload_seconds = 0.0;
  std::vector<double> load_seconds;  // per device
};

enum class ParallelKind { None, ModelSplit, DataReplica };

struct Parallelism {
  ParallelKind kind = ParallelKind::None;
  int64_t index = 0;
  int64_t count = 1;
};

struct DeviceSlot {
  int task = -1;  // -1: idle
  int replica = 0;
};

struct Assignment {
  int device_count = 0;
  std::vector<Task> tasks;
  std::vector<DeviceSlot> devices;
  std::vector<Edge> edges;
  Prediction predicted;
  std::vector<std::string> notes;

  int used_devices() const;
  Parallelism parallelism(int device) const;
  // Devices running replicas of a task, in replica order.
  std::vector<int> devices_of(int task) const;
  // Task holding the graph's source layers.
  int recorder_task(const ModelGraph& graph) const;
};

struct AssignmentSet {
  std::string model;
  std::vector<Assignment> by_n;  // index n-1
  const Assignment& at(int n) const;
};

// Atomic layer groups in dependency order. Elementwise glue joins its
// producer, a flow stack or the only consumer of a source joins the source,
// and temporal pyramids join the concat that consumes them.
std::vector<std::vector<int>> model_to_layers(const ModelGraph& graph);

// Greedy left-to-right merge of chained groups while the memory estimate
// fits. Throws PlanError when a single group does not fit.
std::vector<std::vector<int>> find_min_load_tasks(const ModelGraph& graph, const std::vector<std::vector<int>>& groups,
                                                  const DeviceProfile& device);

// Contiguous buckets for n < |T|, minimizing reload seconds per inference.
std::vector<Task> minimize_load_time(const ModelGraph& graph, const std::vector<std::vector<int>>& tasks, int n,
                                     const Profiles& profiles);

struct TransformOption {
  enum class Kind { None, DataReplica, ModelSplit };
  Kind kind = Kind::None;
  int task = -1;
  int layer = -1;
  int64_t k = 1;
  double gain = 1.0;
  int devices_needed = 0;
  std::vector<Task> result;
};

// Compares replicating a task against splitting its most expensive fc or
// conv layer k ways. For an existing replica group or split family, k is the
// new total. Falls back to the other transform when the winner needs more
// than `budget` extra devices.
TransformOption model_vs_data(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int64_t k,
                              int budget, const Profiles& profiles);

// Picks the transform whose application, followed by greedy completion of
// the remaining device budget, gives the highest predicted IPS.
std::optional<std::vector<Task>> choose_best(const ModelGraph& graph, const std::vector<Task>& tasks, int n,
                                             const Profiles& profiles);

// Splits `layer` inside task `task` into k row parts. Stateful layers before
// it stay with part 0, stateless ones move to their own task, and layers
// after the split run in a merge task.
std::vector<Task> split_fc(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int layer, int64_t k);
std::vector<Task> replicate_task(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int k);

std::vector<Edge> task_edges(const ModelGraph& graph, const std::vector<Task>& tasks);
Prediction predict(const ModelGraph& graph, const std::vector<Task>& tasks, const Profiles& profiles);
int devices_needed(const std::vector<Task>& tasks);

// Orders tasks, lays out devices and attaches edges and predictions.
Assignment make_assignment(const ModelGraph& graph, std::vector<Task> tasks, int n, const Profiles& profiles);

AssignmentSet task_assign(const ModelGraph& graph, int n_max, const Profiles& profiles);

// Throws PlanError unless every layer is covered exactly once, split parts
// tile their layer's outputs, edges are acyclic and memory fits.
void check_assignment(const ModelGraph& graph, const Assignment& a, const DeviceProfile& device);

nlohmann::json assignment_to_json(const ModelGraph& graph, const Assignment& a);
// Layers are matched by name, so a plan made at one scale runs at another.
Assignment assignment_from_json(const ModelGraph& graph, const nlohmann::json& doc, const Profiles& profiles);
nlohmann::json assignment_set_to_json(const ModelGraph& graph, const AssignmentSet& set);
AssignmentSet assignment_set_from_json(const ModelGraph& graph, const nlohmann::json& doc, const Profiles& profiles);

std::string describe_task(const ModelGraph& graph, const Task& task);
// Device -> layers -> parallelism table.
std::string plan_table(const ModelGraph& graph, const Assignment& a);

}  // namespace edgepart

#endif  // EDGEPART_PARTITIONER_HPP
