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

#include "edgepart/runtime/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

double total(const LatencyBreakdown& b) { return b.compute + b.comm + b.reload; }

// Tasks ordered so producers come before consumers.
std::vector<int> task_order(const Assignment& a) {
  const size_t n = a.tasks.size();
  std::vector<std::set<int>> succ(n);
  std::vector<int> indeg(n, 0);
  for (const auto& e : a.edges) {
    if (succ[static_cast<size_t>(e.from_task)].insert(e.to_task).second) ++indeg[static_cast<size_t>(e.to_task)];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int t = ready.top();
    ready.pop();
    order.push_back(t);
    for (int s : succ[static_cast<size_t>(t)]) {
      if (--indeg[static_cast<size_t>(s)] == 0) ready.push(s);
    }
  }
  if (order.size() != n) throw PlanError("task graph has a cycle");
  return order;
}

}  // namespace

SimResult simulate(const ModelGraph& graph, const Assignment& a, const Profiles& profiles, const SimOptions& options) {
  if (options.items < 0 || options.fps < 0.0) throw Error("bad simulation options");
  const DeviceProfile& dev = profiles.device;
  const size_t n_tasks = a.tasks.size();
  const int recorder = a.recorder_task(graph);
  if (recorder < 0) throw PlanError("assignment has no recorder task");
  const auto order = task_order(a);

  std::vector<std::vector<Edge>> inbound(n_tasks);
  for (const auto& e : a.edges) inbound[static_cast<size_t>(e.to_task)].push_back(e);
  std::vector<bool> holds_output(n_tasks, false);
  int64_t output_from = 0;
  for (const auto& name : graph.outputs()) {
    const int l = graph.index_of(name);
    output_from = std::max(output_from, graph.first_tag(l));
    for (const auto& t : a.tasks) {
      if (t.contains(l)) holds_output[static_cast<size_t>(t.id)] = true;
    }
  }
  std::vector<std::vector<std::vector<LayerSlice>>> segments(n_tasks);
  for (const auto& t : a.tasks) {
    segments[static_cast<size_t>(t.id)] = t.reloading() ? t.segments : std::vector<std::vector<LayerSlice>>{t.layers};
  }

  const size_t n_dev = a.devices.size();
  std::vector<double> device_free(n_dev, 0.0);
  std::vector<double> busy(n_dev, 0.0);
  std::vector<int> resident(n_dev, 0);
  std::map<std::pair<int, int>, double> compute_cache;

  SimResult r;
  RunMetrics& m = r.metrics;
  for (size_t d = 0; d < n_dev; ++d) {
    const DeviceSlot& slot = a.devices[d];
    if (slot.task < 0) continue;
    m.setup_seconds =
        std::max(m.setup_seconds, estimate_load_time(graph, segments[static_cast<size_t>(slot.task)].front(), dev));
  }

  const int64_t cap = options.inflight > 0 ? options.inflight : 2 * static_cast<int64_t>(a.used_devices()) + 1;
  std::vector<double> completion;
  std::vector<double> finish(n_tasks), arrive(n_tasks);
  std::vector<LatencyBreakdown> path(n_tasks);
  double last_admit = -1.0;
  int64_t next_frame = 0;
  double output_first = 0.0, output_last = 0.0;
  LatencyBreakdown path_sum;
  double end = 0.0;

  for (int64_t tag = 0; tag < options.items; ++tag) {
    double ready = tag >= cap ? completion[static_cast<size_t>(tag - cap)] : 0.0;
    ready = std::max(ready, last_admit);
    double admit = ready;
    if (options.fps > 0.0) {
      const int64_t frame = std::max<int64_t>(next_frame, static_cast<int64_t>(std::ceil(ready * options.fps - 1e-9)));
      m.drops += frame - next_frame;
      next_frame = frame + 1;
      admit = static_cast<double>(frame) / options.fps;
    }
    last_admit = admit;

    double done = admit;
    double out_time = 0.0;
    LatencyBreakdown out_path;
    for (int task : order) {
      const size_t ti = static_cast<size_t>(task);
      const Task& t = a.tasks[ti];
      double start = 0.0;
      LatencyBreakdown p;
      bool active = task == recorder;
      if (task == recorder) start = admit;
      std::map<int, int64_t> bytes_from;
      for (const auto& e : inbound[ti]) {
        if (graph.first_tag(e.layer) > tag) continue;
        active = true;
        bytes_from[e.from_task] += e.bytes;
      }
      if (!active) {
        finish[ti] = arrive[ti] = -1.0;
        continue;
      }
      for (const auto& [from, bytes] : bytes_from) {
        const double c = comm_latency(bytes, profiles.comm);
        start = std::max(start, finish[static_cast<size_t>(from)] + c);
        LatencyBreakdown cand = path[static_cast<size_t>(from)];
        cand.comm += c;
        if (total(cand) > total(p)) p = cand;
      }
      const size_t d = static_cast<size_t>(a.devices_of(task).at(static_cast<size_t>(tag % t.replicas)));
      start = std::max(start, device_free[d]);
      double compute = 0.0, reload = 0.0;
      const auto& segs = segments[ti];
      for (size_t si = 0; si < segs.size(); ++si) {
        std::vector<LayerSlice> act;
        for (const auto& s : segs[si]) {
          if (graph.first_tag(s.layer) <= tag) act.push_back(s);
        }
        if (act.empty()) continue;
        if (t.reloading() && resident[d] != static_cast<int>(si)) {
          reload += estimate_load_time(graph, segs[si], dev);
          resident[d] = static_cast<int>(si);
        }
        const auto key = std::make_pair(task * 1024 + static_cast<int>(si), static_cast<int>(act.size()));
        auto it = compute_cache.find(key);
        if (it == compute_cache.end()) it = compute_cache.emplace(key, estimate_compute(graph, act, dev)).first;
        compute += it->second;
      }
      finish[ti] = start + reload + compute;
      device_free[d] = finish[ti];
      busy[d] += reload + compute;
      p.compute += compute;
      p.reload += reload;
      path[ti] = p;
      done = std::max(done, finish[ti]);
      if (holds_output[ti] && finish[ti] >= out_time) {
        out_time = finish[ti];
        if (total(p) >= total(out_path)) out_path = p;
      }
    }
    completion.push_back(done);
    end = std::max(end, done);
    if (tag >= output_from) {
      if (m.outputs == 0) output_first = out_time;
      output_last = out_time;
      ++m.outputs;
      r.output_times.push_back(out_time);
      r.paths.push_back(out_path);
      path_sum.compute += out_path.compute;
      path_sum.comm += out_path.comm;
      path_sum.reload += out_path.reload;
    }
  }

  if (m.outputs > 0) {
    const double n = static_cast<double>(m.outputs);
    m.breakdown = LatencyBreakdown{path_sum.compute / n, path_sum.comm / n, path_sum.reload / n};
    m.t_forward_seconds = total(m.breakdown);
  }
  if (m.outputs > 1 && output_last > output_first) {
    m.ips = static_cast<double>(m.outputs - 1) / (output_last - output_first);
  }
  m.wall_seconds = end;
  m.per_device_busy_seconds = busy;
  return r;
}

}  // namespace edgepart
