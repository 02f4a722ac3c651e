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

#ifndef EDGEPART_RUNTIME_SIMULATOR_HPP
#define EDGEPART_RUNTIME_SIMULATOR_HPP

#include <cstdint>
#include <vector>

#include "edgepart/cost_model.hpp"
#include "edgepart/metrics.hpp"
#include "edgepart/partitioner.hpp"

namespace edgepart {

struct SimOptions {
  int64_t items = 60;  // tagged items to push through
  double fps = 30.0;   // camera rate; 0 admits as soon as there is room
  // Items admitted but not yet finished by every task; 0 picks
  // 2 * devices + 1.
  int64_t inflight = 0;
};

struct SimResult {
  RunMetrics metrics;
  std::vector<double> output_times;  // per output tag
  std::vector<LatencyBreakdown> paths;
};

// Event-driven replay of an assignment with cost-model timings. Each device
// serves its tags first-come first-served; messages arrive comm_latency
// after the producer finishes. t_forward is the per-item critical path of
// compute, comm and reload, without queueing.
SimResult simulate(const ModelGraph& graph, const Assignment& a, const Profiles& profiles,
                   const SimOptions& options = {});

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_SIMULATOR_HPP
