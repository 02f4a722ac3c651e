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

#ifndef EDGEPART_RUNTIME_CLUSTER_HPP
#define EDGEPART_RUNTIME_CLUSTER_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edgepart/engine.hpp"
#include "edgepart/metrics.hpp"
#include "edgepart/partitioner.hpp"
#include "edgepart/runtime/ip_table.hpp"
#include "edgepart/runtime/transport.hpp"
#include "edgepart/runtime/worker.hpp"

namespace edgepart {

struct ClusterOptions {
  TransportKind transport = TransportKind::InProcess;
  TransportOptions transport_options;
  size_t inbox_capacity = 16;
  // Extra seconds of simulated work per tag, on every device or per device.
  double compute_delay_seconds = 0.0;
  std::map<int, double> device_delay_seconds;
  double cooldown_seconds = 2.0;
  int max_sampling_divisor = 8;
  // Defaults to 0..n-1.
  std::vector<int> device_ids;
  int corrupt_device = -1;
  // Every computed piece is also sent to the collector.
  bool trace = false;
  double timeout_seconds = 300.0;
};

struct StreamResult {
  std::map<int64_t, TensorMap> outputs;
  // Raw frame index of every tag the recorder kept.
  std::vector<int64_t> kept;
  // Trace mode: (layer, part) pieces per tag.
  std::map<int64_t, std::map<std::pair<int, int64_t>, Tensor>> trace;
  RunMetrics metrics;
  int64_t camera_drops = 0;
  int64_t sampling_drops = 0;
  std::string error;
  bool ok() const { return error.empty(); }
};

struct ChairsReport {
  IPTable table;
  std::vector<int> reloaded;  // devices that loaded new weights
  double setup_seconds = 0.0;
  int attempts = 0;
};

// One worker per device of the n-device plan, a collector for outputs and a
// controller endpoint for acknowledgements.
class Cluster {
 public:
  Cluster(const ModelGraph& graph, const AssignmentSet& plans, int n, ClusterOptions options = {});
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  // fps > 0 paces the camera, drops frames the recorder cannot accept and
  // lets the recorder lower its sampling rate under backpressure. fps == 0
  // feeds as fast as the recorder accepts, without loss.
  StreamResult run_stream(const std::map<std::string, std::vector<Tensor>>& frames, double fps = 0.0);

  ChairsReport musical_chairs(const ChairsTrigger& trigger);
  // A RoleUpdate sent by an arbitrary device. True if any worker accepted it.
  bool propose_update(int from_device, const IPTable& table);

  const IPTable& table() const { return table_; }
  std::vector<int> devices() const;
  std::map<int, WorkerStats> stats() const;
  const ModelGraph& graph() const { return graph_; }
  const Assignment& assignment() const { return plans_.at(table_.plan_n); }
  double setup_seconds() const { return setup_seconds_; }
  size_t peak_inbox_occupancy() const;
  size_t inbox_capacity() const { return options_.inbox_capacity; }
  void stop();

 private:
  class Collector;
  std::vector<std::pair<uint64_t, std::pair<double, bool>>> await_acks(uint64_t version, size_t count,
                                                                       double timeout);
  void send_command(int device, Command c, std::vector<uint8_t> payload);
  void check_workers() const;

  const ModelGraph& graph_;
  const AssignmentSet& plans_;
  ClusterOptions options_;
  std::unique_ptr<Transport> net_;
  std::map<int, std::unique_ptr<Worker>> workers_;
  std::unique_ptr<Collector> collector_;
  Inbox controller_;
  std::string controller_address_;
  IPTable table_;
  uint16_t stream_ = 0;
  double setup_seconds_ = 0.0;
  bool stopped_ = false;
};

// Distributed outputs against run_reference_stream on the frames the
// recorder kept. Returns the largest absolute difference; +inf when a tag or
// output is missing on either side.
double max_output_diff(const ModelGraph& graph, const std::map<std::string, std::vector<Tensor>>& frames,
                       const StreamResult& result);

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_CLUSTER_HPP
