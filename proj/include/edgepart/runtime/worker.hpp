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

#ifndef EDGEPART_RUNTIME_WORKER_HPP
#define EDGEPART_RUNTIME_WORKER_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "edgepart/engine.hpp"
#include "edgepart/partitioner.hpp"
#include "edgepart/runtime/inbox.hpp"
#include "edgepart/runtime/ip_table.hpp"
#include "edgepart/runtime/sliding_window.hpp"
#include "edgepart/runtime/transport.hpp"
#include "edgepart/runtime/wire.hpp"

namespace edgepart {

// Seconds on a process-wide monotonic clock.
double monotonic_seconds();

// Trace pieces go to the collector under this role.
constexpr uint16_t kTraceRole = 0xFFFC;

// Controller commands carried by Heartbeat tags.
enum class Command : uint64_t { BroadcastTable = 1, Chairs = 2, Rebroadcast = 3 };

// Per-task execution plan derived from an Assignment.
struct TaskProgram {
  int task = -1;
  int replica = 0;
  int replicas = 1;
  std::vector<LayerSlice> layers;
  std::vector<std::vector<LayerSlice>> segments;  // one per resident subset
  bool recorder = false;
  std::vector<Edge> inbound;
  std::map<int, std::vector<Edge>> outbound;  // by consumer task
  bool reloading = false;
  std::vector<LayerSlice> outputs;            // graph outputs held here
  std::vector<int> predecessors;              // producer tasks
  int64_t start_tag = 0;
  int64_t output_from = 0;
  std::map<std::pair<int, int64_t>, int64_t> keep;  // history depth per piece
  std::map<int, int64_t> part_count;               // pieces per layer

  static TaskProgram build(const ModelGraph& graph, const Assignment& a, int task, int replica);
  int64_t expected_pieces(const ModelGraph& graph, int64_t tag) const;
};

struct WorkerConfig {
  int device = 0;
  const ModelGraph* graph = nullptr;
  const AssignmentSet* plans = nullptr;
  Transport* net = nullptr;
  std::string collector_address;
  std::string controller_address;
  size_t inbox_capacity = 16;
  // Extra seconds of simulated work per processed tag.
  double compute_delay = 0.0;
  double cooldown_seconds = 2.0;
  int max_sampling_divisor = 8;
  // Perturbs the first weight of this worker's first weighted layer.
  bool corrupt = false;
  bool trace = false;
};

struct WorkerStats {
  double busy_seconds = 0.0;
  double reload_seconds = 0.0;
  double setup_seconds = 0.0;
  int64_t reloads = 0;
  int64_t role_reloads = 0;
  int64_t tags = 0;
  int64_t misrouted = 0;
  int64_t unroutable = 0;
  int64_t late = 0;
  int64_t window_overflows = 0;
  int64_t almost_full_sent = 0;
  int64_t almost_full_received = 0;
  int64_t sampling_drops = 0;
  int64_t rejected_updates = 0;
  int64_t master_writes = 0;
  uint64_t table_version = 0;
  int sampling_divisor = 1;
};

// One device: a single event loop over its inbox.
class Worker {
 public:
  explicit Worker(WorkerConfig config);
  ~Worker();
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  Inbox& inbox() { return inbox_; }
  int device() const { return config_.device; }
  void start();
  // Closes the inbox and joins the loop.
  void stop();
  bool running() const { return running_; }
  bool failed() const { return failed_; }
  std::string error() const;
  WorkerStats stats() const;

 private:
  struct Pending {
    std::map<std::pair<int, int64_t>, Tensor> pieces;
    LatencyBreakdown path;
    double origin = 0.0;
    bool have_path = false;
  };

  void loop();
  void handle(Message m);
  void on_table(const Message& m);
  void on_command(const Message& m);
  void on_data(const Message& m);
  void on_raw_frame(const Message& m, const Bundle& b);
  void on_almost_full(const Message& m);
  void end_of_clip(const Message& m);
  std::pair<bool, double> reconfigure();
  void maybe_finish_clip();
  void compute_slice(const LayerSlice& s, int64_t tag);
  void reset_stream(uint16_t stream_id);
  void execute(int64_t tag, Pending p);
  double load_params(const std::vector<LayerSlice>& slices);
  Tensor full_value(int layer, int64_t tag) const;
  const Tensor& piece(int layer, int64_t part, int64_t tag) const;
  void send_to_role(int task, int replica, Message m);
  void broadcast(const IPTable& t);
  void ack(uint64_t version, double reload_seconds, bool reloaded);
  template <typename F>
  void with_stats(F&& f) {
    std::lock_guard lock(stats_mu_);
    f(stats_);
  }

  WorkerConfig config_;
  Inbox inbox_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> failed_{false};
  mutable std::mutex stats_mu_;
  WorkerStats stats_;
  std::string error_;

  // Loop-owned state.
  IPTable table_;
  const Assignment* plan_ = nullptr;
  TaskProgram program_;
  std::map<int, LayerParams> params_;
  int resident_segment_ = -1;
  Task work_;
  bool configured_ = false;
  int64_t raw_seen_ = 0;
  int64_t clip_end_ = -1;
  bool adaptive_ = true;
  IPTable last_broadcast_;
  bool corrupted_ = false;
  uint16_t stream_ = 0;
  std::map<std::pair<int, int64_t>, std::map<int64_t, Tensor>> history_;
  std::map<int64_t, Pending> assembling_;
  SlidingWindow<Pending> order_{1};
  int64_t next_record_tag_ = 0;
  std::vector<int64_t> kept_raw_;
  int64_t phase_ = 0;
  int divisor_ = 1;
  double cooldown_until_ = 0.0;
};

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_WORKER_HPP
