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

#include "edgepart/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

constexpr double kRelTol = 1e-9;

bool same_slice(const LayerSlice& a, const LayerSlice& b) {
  return a.layer == b.layer && a.part == b.part && a.count == b.count;
}

bool same_task(const Task& a, const Task& b) {
  if (a.layers.size() != b.layers.size() || a.replicas != b.replicas || !(a.split == b.split)) return false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (!same_slice(a.layers[i], b.layers[i])) return false;
  }
  return true;
}

std::vector<int> layer_ids(const std::vector<LayerSlice>& slices) {
  std::vector<int> out;
  for (const auto& s : slices) out.push_back(s.layer);
  return out;
}

void sort_by_rank(const ModelGraph& graph, std::vector<int>& layers) {
  std::sort(layers.begin(), layers.end(), [&](int a, int b) { return graph.topo_rank(a) < graph.topo_rank(b); });
}

std::tuple<int, int64_t> task_key(const ModelGraph& graph, const Task& t) {
  int rank = -1;
  for (const auto& s : t.layers) rank = std::max(rank, graph.topo_rank(s.layer));
  return {rank, t.split.active() ? t.split.part : 0};
}

void normalize(const ModelGraph& graph, std::vector<Task>& tasks) {
  std::stable_sort(tasks.begin(), tasks.end(),
                   [&](const Task& a, const Task& b) { return task_key(graph, a) < task_key(graph, b); });
  for (size_t i = 0; i < tasks.size(); ++i) tasks[i].id = static_cast<int>(i);
}

bool is_stateful(const LayerSpec& layer) { return is_windowed(layer) || layer.is<Source>(); }

// Leading source layers, which stay on the camera device when the rest of
// the task is replicated.
size_t source_prefix(const ModelGraph& graph, const Task& t) {
  size_t n = 0;
  while (n < t.layers.size() && graph.layer(t.layers[n].layer).is<Source>()) ++n;
  return n;
}

bool replicable(const ModelGraph& graph, const Task& t) {
  if (t.reloading()) return false;
  const size_t sources = source_prefix(graph, t);
  if (sources > 0 && (t.replicas > 1 || sources == t.layers.size())) return false;
  for (size_t i = sources; i < t.layers.size(); ++i) {
    if (is_stateful(graph.layer(t.layers[i].layer))) return false;
  }
  return true;
}

double task_compute(const ModelGraph& graph, const Task& t, const DeviceProfile& device) {
  if (!t.reloading()) return estimate_compute(graph, t.layers, device);
  double s = 0.0;
  for (const auto& seg : t.segments) s += estimate_compute(graph, seg, device);
  return s;
}

double task_reload(const ModelGraph& graph, const Task& t, const DeviceProfile& device) {
  if (!t.reloading()) return 0.0;
  double s = 0.0;
  for (const auto& seg : t.segments) s += estimate_load_time(graph, seg, device);
  return s;
}

// Largest fc and largest conv of a task, by op count.
std::vector<int> split_candidates(const ModelGraph& graph, const Task& t) {
  int best_fc = -1, best_conv = -1;
  double fc_ops = -1.0, conv_ops = -1.0;
  for (const auto& s : t.layers) {
    if (s.count != 1) continue;
    const LayerSpec& l = graph.layer(s.layer);
    const double ops = layer_cost(graph, s).ops;
    if (l.is<FullyConnected>() && ops > fc_ops) {
      fc_ops = ops;
      best_fc = s.layer;
    } else if (l.is<Conv2D>() && ops > conv_ops) {
      conv_ops = ops;
      best_conv = s.layer;
    }
  }
  std::vector<int> out;
  if (best_fc >= 0) out.push_back(best_fc);
  if (best_conv >= 0) out.push_back(best_conv);
  return out;
}

int64_t out_dim(const ModelGraph& graph, int layer) {
  const TensorShape& s = graph.shape(layer);
  return s[s.rank() - 1];
}

std::vector<double> sorted_stages(const Prediction& p) {
  std::vector<double> v = p.stage_seconds;
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

// -1 when a is the better plan, 1 when b is, 0 on a tie.
int compare_plans(const Prediction& a, const Prediction& b) {
  const double scale = std::max({a.ips, b.ips, 1e-300});
  if (std::abs(a.ips - b.ips) > kRelTol * scale) return a.ips > b.ips ? -1 : 1;
  const auto sa = sorted_stages(a), sb = sorted_stages(b);
  for (size_t i = 0; i < std::min(sa.size(), sb.size()); ++i) {
    if (std::abs(sa[i] - sb[i]) > kRelTol * std::max(sa[i], sb[i])) return sa[i] < sb[i] ? -1 : 1;
  }
  return 0;
}

// Largest stage among tasks of `after` that are not present in `before`.
double changed_stage(const std::vector<Task>& before, const std::vector<Task>& after, const Prediction& p) {
  double worst = 0.0;
  for (size_t i = 0; i < after.size(); ++i) {
    bool existed = false;
    for (const auto& b : before) existed = existed || same_task(b, after[i]);
    if (!existed) worst = std::max(worst, p.stage_seconds[i]);
  }
  return worst;
}

}  // namespace

bool Task::contains(int layer) const {
  return std::any_of(layers.begin(), layers.end(), [&](const LayerSlice& s) { return s.layer == layer; });
}

int Assignment::used_devices() const {
  return static_cast<int>(std::count_if(devices.begin(), devices.end(), [](const DeviceSlot& d) { return d.task >= 0; }));
}

Parallelism Assignment::parallelism(int device) const {
  const DeviceSlot& slot = devices.at(static_cast<size_t>(device));
  if (slot.task < 0) return {};
  const Task& t = tasks[static_cast<size_t>(slot.task)];
  if (t.replicas > 1) return {ParallelKind::DataReplica, slot.replica, t.replicas};
  if (t.split.active()) return {ParallelKind::ModelSplit, t.split.part, t.split.count};
  return {};
}

std::vector<int> Assignment::devices_of(int task) const {
  std::vector<int> out(static_cast<size_t>(tasks.at(static_cast<size_t>(task)).replicas), -1);
  for (size_t d = 0; d < devices.size(); ++d) {
    if (devices[d].task == task) out[static_cast<size_t>(devices[d].replica)] = static_cast<int>(d);
  }
  return out;
}

int Assignment::recorder_task(const ModelGraph& graph) const {
  for (const auto& t : tasks) {
    for (const auto& s : t.layers) {
      if (graph.layer(s.layer).is<Source>()) return t.id;
    }
  }
  return -1;
}

const Assignment& AssignmentSet::at(int n) const {
  if (n < 1 || n > static_cast<int>(by_n.size())) throw PlanError("no assignment for " + std::to_string(n) + " devices");
  return by_n[static_cast<size_t>(n - 1)];
}

std::vector<std::vector<int>> model_to_layers(const ModelGraph& graph) {
  const int n = static_cast<int>(graph.size());
  std::vector<int> group(static_cast<size_t>(n), -1);
  int next = 0;
  for (int i : graph.topo_order()) {
    const LayerSpec& l = graph.layer(i);
    const auto producers = graph.input_indices(i);
    const bool glue = l.is<ReLU>() || l.is<BatchNorm>() || l.is<Softmax>() || l.is<Sink>() || l.is<FlowStack>();
    const bool lone_source = producers.size() == 1 && graph.layer(producers[0]).is<Source>() &&
                             graph.consumers(producers[0]).size() == 1;
    if ((glue || lone_source) && producers.size() == 1) {
      group[static_cast<size_t>(i)] = group[static_cast<size_t>(producers[0])];
    } else {
      group[static_cast<size_t>(i)] = next++;
    }
  }
  // Pyramids hold per-stream state that only their concat consumes.
  for (int i : graph.topo_order()) {
    if (!graph.layer(i).is<TemporalPyramid>()) continue;
    const auto& consumers = graph.consumers(i);
    if (consumers.size() != 1 || !graph.layer(consumers[0]).is<Concat>()) continue;
    const int from = group[static_cast<size_t>(i)];
    const int to = group[static_cast<size_t>(consumers[0])];
    for (int& g : group) {
      if (g == from) g = to;
    }
  }
  std::map<int, std::vector<int>> members;
  for (int i = 0; i < n; ++i) members[group[static_cast<size_t>(i)]].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& [g, layers] : members) {
    sort_by_rank(graph, layers);
    out.push_back(layers);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return graph.topo_rank(a.back()) < graph.topo_rank(b.back());
  });
  return out;
}

std::vector<std::vector<int>> find_min_load_tasks(const ModelGraph& graph, const std::vector<std::vector<int>>& groups,
                                                  const DeviceProfile& device) {
  std::vector<int> group_of(graph.size(), -1);
  for (size_t g = 0; g < groups.size(); ++g) {
    for (int l : groups[g]) group_of[static_cast<size_t>(l)] = static_cast<int>(g);
  }
  auto fits = [&](const std::vector<int>& layers) {
    return estimate_memory(graph, whole_layers(layers), device.overhead_factor) <= device.mem_size;
  };

  std::vector<std::vector<int>> tasks;
  int last_group = -1;
  for (size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (!fits(members)) {
      std::ostringstream msg;
      msg << "layer group starting at '" << graph.layer(members.front()).name << "' needs "
          << estimate_memory(graph, whole_layers(members), device.overhead_factor) << " bytes, device has "
          << device.mem_size;
      throw PlanError(msg.str());
    }
    bool chained = !tasks.empty();
    if (chained) {
      std::set<int> producers;
      for (int l : members) {
        for (int p : graph.input_indices(l)) {
          if (group_of[static_cast<size_t>(p)] != static_cast<int>(g)) producers.insert(group_of[static_cast<size_t>(p)]);
        }
      }
      chained = producers == std::set<int>{last_group};
      for (int l : groups[static_cast<size_t>(last_group)]) {
        for (int c : graph.consumers(l)) {
          const int cg = group_of[static_cast<size_t>(c)];
          chained = chained && (cg == last_group || cg == static_cast<int>(g));
        }
      }
    }
    if (chained) {
      std::vector<int> merged = tasks.back();
      merged.insert(merged.end(), members.begin(), members.end());
      if (fits(merged)) {
        sort_by_rank(graph, merged);
        tasks.back() = std::move(merged);
        last_group = static_cast<int>(g);
        continue;
      }
    }
    tasks.push_back(members);
    last_group = static_cast<int>(g);
  }
  return tasks;
}

namespace {

Task make_bucket(const ModelGraph& graph, const std::vector<std::vector<int>>& tasks, size_t begin, size_t end,
                 const DeviceProfile& device) {
  std::vector<int> all;
  for (size_t i = begin; i < end; ++i) all.insert(all.end(), tasks[i].begin(), tasks[i].end());
  sort_by_rank(graph, all);
  Task t;
  t.layers = whole_layers(all);
  if (estimate_memory(graph, t.layers, device.overhead_factor) <= device.mem_size) return t;
  // Pack consecutive tasks into the fewest resident subsets.
  std::vector<int> current;
  for (size_t i = begin; i < end; ++i) {
    std::vector<int> trial = current;
    trial.insert(trial.end(), tasks[i].begin(), tasks[i].end());
    sort_by_rank(graph, trial);
    if (!current.empty() &&
        estimate_memory(graph, whole_layers(trial), device.overhead_factor) > device.mem_size) {
      t.segments.push_back(whole_layers(current));
      current.assign(tasks[i].begin(), tasks[i].end());
      sort_by_rank(graph, current);
    } else {
      current = std::move(trial);
    }
  }
  t.segments.push_back(whole_layers(current));
  return t;
}

void compositions(size_t items, size_t parts, std::vector<size_t>& cuts, size_t from,
                  std::vector<std::vector<size_t>>& out) {
  if (cuts.size() + 1 == parts) {
    out.push_back(cuts);
    return;
  }
  const size_t remaining = parts - 1 - cuts.size();
  for (size_t c = from; c + remaining <= items - 1; ++c) {
    cuts.push_back(c + 1);
    compositions(items, parts, cuts, c + 1, out);
    cuts.pop_back();
  }
}

}  // namespace

std::vector<Task> minimize_load_time(const ModelGraph& graph, const std::vector<std::vector<int>>& tasks, int n,
                                     const Profiles& profiles) {
  if (n < 1) throw PlanError("device count must be >= 1");
  const size_t count = tasks.size();
  if (static_cast<size_t>(n) >= count) {
    std::vector<Task> out;
    for (const auto& t : tasks) out.push_back(Task{0, whole_layers(t), 1, {}, {}});
    normalize(graph, out);
    return out;
  }
  const DeviceProfile& device = profiles.device;
  auto build = [&](const std::vector<size_t>& cuts) {
    std::vector<Task> out;
    size_t begin = 0;
    for (size_t i = 0; i <= cuts.size(); ++i) {
      const size_t end = i < cuts.size() ? cuts[i] : count;
      out.push_back(make_bucket(graph, tasks, begin, end, device));
      begin = end;
    }
    normalize(graph, out);
    return out;
  };
  auto reload_of = [&](const std::vector<Task>& plan) {
    double s = 0.0;
    for (const auto& t : plan) s += task_reload(graph, t, device);
    return s;
  };

  std::vector<std::vector<size_t>> options;
  if (count <= 12) {
    std::vector<size_t> cuts;
    compositions(count, static_cast<size_t>(n), cuts, 0, options);
  } else {
    // Greedy: merge the adjacent pair that adds the least reload.
    std::vector<size_t> cuts(count - 1);
    std::iota(cuts.begin(), cuts.end(), size_t{1});
    while (cuts.size() + 1 > static_cast<size_t>(n)) {
      size_t best = 0;
      double best_reload = 0.0;
      for (size_t i = 0; i < cuts.size(); ++i) {
        auto trial = cuts;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
        const double r = reload_of(build(trial));
        if (i == 0 || r < best_reload - 1e-12) {
          best = i;
          best_reload = r;
        }
      }
      cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(best));
    }
    options.push_back(cuts);
  }

  std::vector<Task> best;
  double best_reload = 0.0;
  Prediction best_pred;
  for (const auto& cuts : options) {
    auto plan = build(cuts);
    const double reload = reload_of(plan);
    Prediction p = predict(graph, plan, profiles);
    bool better = best.empty();
    if (!better) {
      if (reload < best_reload - kRelTol * std::max(1.0, best_reload)) {
        better = true;
      } else if (std::abs(reload - best_reload) <= kRelTol * std::max(1.0, best_reload)) {
        better = compare_plans(p, best_pred) < 0;
      }
    }
    if (better) {
      best = std::move(plan);
      best_reload = reload;
      best_pred = p;
    }
  }
  return best;
}

std::vector<Task> split_fc(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int layer, int64_t k) {
  const Task& t = tasks.at(static_cast<size_t>(task));
  const LayerSpec& spec = graph.layer(layer);
  if (!spec.is<FullyConnected>() && !spec.is<Conv2D>()) {
    throw PlanError("layer '" + spec.name + "' is neither fc nor conv and cannot be split");
  }
  if (k < 1 || k > out_dim(graph, layer)) {
    throw PlanError("cannot split '" + spec.name + "' " + std::to_string(k) + " ways");
  }
  std::vector<Task> out;
  if (t.split.active()) {
    if (t.split.layer != layer) throw PlanError("task already holds a split of another layer");
    std::vector<LayerSlice> prefix, group;
    for (const auto& other : tasks) {
      if (other.split.layer != layer) continue;
      if (other.replicas != 1) throw PlanError("cannot re-split a replicated part");
      if (other.split.part != 0) continue;
      for (const auto& s : other.layers) (s.count == 1 ? prefix : group).push_back(s);
    }
    for (const auto& other : tasks) {
      if (other.split.layer != layer) out.push_back(other);
    }
    for (int64_t i = 0; i < k; ++i) {
      Task part;
      part.split = SplitInfo{layer, i, k};
      if (i == 0) part.layers = prefix;
      for (const auto& s : group) part.layers.push_back(LayerSlice{s.layer, i, k});
      out.push_back(std::move(part));
    }
    normalize(graph, out);
    return out;
  }

  if (t.replicas != 1 || t.reloading()) throw PlanError("only plain tasks can be split");
  if (k == 1) return tasks;
  size_t pos = t.layers.size();
  for (size_t i = 0; i < t.layers.size(); ++i) {
    if (t.layers[i].layer == layer) pos = i;
  }
  if (pos == t.layers.size()) throw PlanError("layer '" + spec.name + "' is not in the task");

  size_t end = pos + 1;
  while (end < t.layers.size()) {
    const int prev = t.layers[end - 1].layer;
    const int cur = t.layers[end].layer;
    if (!is_partable_glue(graph.layer(cur)) || graph.input_indices(cur) != std::vector<int>{prev} ||
        graph.consumers(prev) != std::vector<int>{cur}) {
      break;
    }
    ++end;
  }
  std::vector<LayerSlice> prefix(t.layers.begin(), t.layers.begin() + static_cast<std::ptrdiff_t>(pos));
  std::vector<LayerSlice> suffix(t.layers.begin() + static_cast<std::ptrdiff_t>(end), t.layers.end());
  const bool pinned = std::any_of(prefix.begin(), prefix.end(),
                                  [&](const LayerSlice& s) { return is_windowed(graph.layer(s.layer)); });

  for (size_t i = 0; i < tasks.size(); ++i) {
    if (static_cast<int>(i) != task) out.push_back(tasks[i]);
  }
  if (!prefix.empty() && !pinned) out.push_back(Task{0, prefix, 1, {}, {}});
  for (int64_t i = 0; i < k; ++i) {
    Task part;
    part.split = SplitInfo{layer, i, k};
    if (i == 0 && pinned) part.layers = prefix;
    for (size_t j = pos; j < end; ++j) part.layers.push_back(LayerSlice{t.layers[j].layer, i, k});
    out.push_back(std::move(part));
  }
  if (!suffix.empty()) out.push_back(Task{0, suffix, 1, {}, {}});
  normalize(graph, out);
  return out;
}

std::vector<Task> replicate_task(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int k) {
  if (k < 1) throw PlanError("replica count must be >= 1");
  std::vector<Task> out = tasks;
  Task& t = out.at(static_cast<size_t>(task));
  if (k == t.replicas) return out;
  if (!replicable(graph, t)) throw PlanError("task " + std::to_string(task) + " keeps cross-item state");
  const size_t sources = source_prefix(graph, t);
  if (sources > 0 && k > 1) {
    Task recorder{0, std::vector<LayerSlice>(t.layers.begin(), t.layers.begin() + static_cast<std::ptrdiff_t>(sources)),
                  1, {}, {}};
    t.layers.erase(t.layers.begin(), t.layers.begin() + static_cast<std::ptrdiff_t>(sources));
    t.replicas = k;
    out.push_back(std::move(recorder));
    normalize(graph, out);
    return out;
  }
  t.replicas = k;
  return out;
}

std::vector<Edge> task_edges(const ModelGraph& graph, const std::vector<Task>& tasks) {
  std::vector<Edge> edges;
  std::set<std::tuple<int, int, int, int64_t>> seen;
  for (size_t c = 0; c < tasks.size(); ++c) {
    for (const auto& s : tasks[c].layers) {
      for (int p : graph.input_indices(s.layer)) {
        if (tasks[c].contains(p)) continue;
        bool found = false;
        for (size_t f = 0; f < tasks.size(); ++f) {
          for (const auto& ps : tasks[f].layers) {
            if (ps.layer != p) continue;
            found = true;
            if (!seen.insert({static_cast<int>(f), static_cast<int>(c), p, ps.part}).second) continue;
            edges.push_back(Edge{static_cast<int>(f), static_cast<int>(c), p, ps.part, ps.count,
                                 layer_cost(graph, ps).out_bytes});
          }
        }
        if (!found) throw PlanError("no task produces '" + graph.layer(p).name + "'");
      }
    }
  }
  return edges;
}

int devices_needed(const std::vector<Task>& tasks) {
  int n = 0;
  for (const auto& t : tasks) n += t.replicas;
  return n;
}

Prediction predict(const ModelGraph& graph, const std::vector<Task>& tasks, const Profiles& profiles) {
  const DeviceProfile& device = profiles.device;
  const auto edges = task_edges(graph, tasks);
  const size_t n = tasks.size();
  std::vector<double> raw(n, 0.0);
  Prediction p;
  p.stage_seconds.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double reload = task_reload(graph, tasks[i], device);
    raw[i] = task_compute(graph, tasks[i], device) + reload;
    p.reload_seconds += reload;
  }
  std::vector<std::vector<int>> preds(n);
  std::vector<int> indeg(n, 0);
  std::set<std::pair<int, int>> links;
  for (const auto& e : edges) {
    raw[static_cast<size_t>(e.to_task)] += comm_latency(e.bytes, profiles.comm);
    if (links.insert({e.from_task, e.to_task}).second) {
      preds[static_cast<size_t>(e.to_task)].push_back(e.from_task);
      ++indeg[static_cast<size_t>(e.to_task)];
    }
  }
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    p.stage_seconds[i] = raw[i] / tasks[i].replicas;
    worst = std::max(worst, p.stage_seconds[i]);
  }
  p.ips = worst > 0.0 ? 1.0 / worst : 0.0;

  std::vector<std::vector<int>> succ(n);
  for (size_t i = 0; i < n; ++i) {
    for (int f : preds[i]) succ[static_cast<size_t>(f)].push_back(static_cast<int>(i));
  }
  std::vector<double> finish(n, 0.0);
  std::queue<int> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  }
  size_t visited = 0;
  while (!ready.empty()) {
    const int i = ready.front();
    ready.pop();
    ++visited;
    double start = 0.0;
    for (int f : preds[static_cast<size_t>(i)]) start = std::max(start, finish[static_cast<size_t>(f)]);
    finish[static_cast<size_t>(i)] = start + raw[static_cast<size_t>(i)];
    p.t_forward = std::max(p.t_forward, finish[static_cast<size_t>(i)]);
    for (int s : succ[static_cast<size_t>(i)]) {
      if (--indeg[static_cast<size_t>(s)] == 0) ready.push(s);
    }
  }
  if (visited != n) throw PlanError("task graph has a cycle");
  return p;
}

TransformOption model_vs_data(const ModelGraph& graph, const std::vector<Task>& tasks, int task, int64_t k,
                              int budget, const Profiles& profiles) {
  const Task& t = tasks.at(static_cast<size_t>(task));
  TransformOption none;
  none.task = task;
  none.k = k;
  if (k <= 1) return none;

  const Prediction base = predict(graph, tasks, profiles);
  double old_stage = base.stage_seconds[static_cast<size_t>(task)];
  if (t.split.active()) {
    for (size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].split.layer == t.split.layer) old_stage = std::max(old_stage, base.stage_seconds[i]);
    }
  }
  auto finish = [&](TransformOption o) {
    o.task = task;
    o.k = k;
    o.devices_needed = devices_needed(o.result) - devices_needed(tasks);
    const Prediction p = predict(graph, o.result, profiles);
    const double fresh = changed_stage(tasks, o.result, p);
    o.gain = fresh > 0.0 ? old_stage / fresh : 1.0;
    return o;
  };

  std::optional<TransformOption> data, model;
  if (replicable(graph, t) && k > t.replicas) {
    TransformOption o;
    o.kind = TransformOption::Kind::DataReplica;
    o.result = replicate_task(graph, tasks, task, static_cast<int>(k));
    data = finish(std::move(o));
  }
  if (t.split.active()) {
    bool plain = k > t.split.count && k <= out_dim(graph, t.split.layer);
    for (const auto& other : tasks) {
      if (other.split.layer == t.split.layer) plain = plain && other.replicas == 1;
    }
    if (plain) {
      TransformOption o;
      o.kind = TransformOption::Kind::ModelSplit;
      o.layer = t.split.layer;
      o.result = split_fc(graph, tasks, task, t.split.layer, k);
      model = finish(std::move(o));
    }
  } else if (t.replicas == 1 && !t.reloading()) {
    for (int layer : split_candidates(graph, t)) {
      if (k > out_dim(graph, layer)) continue;
      TransformOption o;
      o.kind = TransformOption::Kind::ModelSplit;
      o.layer = layer;
      o.result = split_fc(graph, tasks, task, layer, k);
      o = finish(std::move(o));
      if (!model || o.gain > model->gain * (1.0 + kRelTol)) model = std::move(o);
    }
  }

  std::vector<TransformOption> ranked;
  if (data) ranked.push_back(std::move(*data));
  if (model) {
    const bool model_wins = ranked.empty() || model->gain > ranked[0].gain * (1.0 + kRelTol) ||
                            (std::abs(model->gain - ranked[0].gain) <= kRelTol * ranked[0].gain &&
                             model->devices_needed < ranked[0].devices_needed);
    ranked.insert(model_wins ? ranked.begin() : ranked.end(), std::move(*model));
  }
  for (auto& option : ranked) {
    if (option.devices_needed <= budget) return std::move(option);
  }
  return none;
}

namespace {

std::vector<TransformOption> candidates(const ModelGraph& graph, const std::vector<Task>& tasks, int n,
                                        const Profiles& profiles) {
  const int budget = n - devices_needed(tasks);
  std::vector<TransformOption> out;
  if (budget <= 0) return out;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    const int64_t degree = std::max<int64_t>(t.replicas, t.split.active() ? t.split.count : 1);
    TransformOption o = model_vs_data(graph, tasks, static_cast<int>(i), degree + 1, budget, profiles);
    if (o.kind != TransformOption::Kind::None) out.push_back(std::move(o));
  }
  return out;
}

// Index of the best option by predicted plan, then fewer devices, then
// earliest task.
size_t pick(const std::vector<Prediction>& preds, const std::vector<TransformOption>& options) {
  size_t best = 0;
  for (size_t i = 1; i < options.size(); ++i) {
    const int cmp = compare_plans(preds[i], preds[best]);
    if (cmp < 0 || (cmp == 0 && options[i].devices_needed < options[best].devices_needed)) best = i;
  }
  return best;
}

Prediction greedy_complete(const ModelGraph& graph, std::vector<Task> tasks, int n, const Profiles& profiles) {
  Prediction current = predict(graph, tasks, profiles);
  while (true) {
    auto options = candidates(graph, tasks, n, profiles);
    if (options.empty()) break;
    std::vector<Prediction> preds;
    for (const auto& o : options) preds.push_back(predict(graph, o.result, profiles));
    const size_t best = pick(preds, options);
    if (compare_plans(preds[best], current) >= 0) break;
    tasks = std::move(options[best].result);
    current = preds[best];
  }
  return current;
}

}  // namespace

std::optional<std::vector<Task>> choose_best(const ModelGraph& graph, const std::vector<Task>& tasks, int n,
                                             const Profiles& profiles) {
  auto options = candidates(graph, tasks, n, profiles);
  if (options.empty()) return std::nullopt;
  std::vector<Prediction> completed;
  for (const auto& o : options) completed.push_back(greedy_complete(graph, o.result, n, profiles));
  return std::move(options[pick(completed, options)].result);
}

Assignment make_assignment(const ModelGraph& graph, std::vector<Task> tasks, int n, const Profiles& profiles) {
  normalize(graph, tasks);
  Assignment a;
  a.device_count = n;
  for (const auto& t : tasks) {
    for (int r = 0; r < t.replicas; ++r) a.devices.push_back(DeviceSlot{t.id, r});
  }
  if (static_cast<int>(a.devices.size()) > n) {
    throw PlanError("plan needs " + std::to_string(a.devices.size()) + " devices, only " + std::to_string(n) +
                    " available");
  }
  a.devices.resize(static_cast<size_t>(n));
  a.edges = task_edges(graph, tasks);
  a.predicted = predict(graph, tasks, profiles);
  for (const auto& slot : a.devices) {
    double load = 0.0;
    if (slot.task >= 0) {
      const Task& t = tasks[static_cast<size_t>(slot.task)];
      load = estimate_load_time(graph, t.reloading() ? t.segments.front() : t.layers, profiles.device);
    }
    a.predicted.load_seconds.push_back(load);
  }
  a.tasks = std::move(tasks);
  return a;
}

AssignmentSet task_assign(const ModelGraph& graph, int n_max, const Profiles& profiles) {
  if (n_max < 1) throw PlanError("n_max must be >= 1");
  profiles.device.validate();
  const auto base = find_min_load_tasks(graph, model_to_layers(graph), profiles.device);
  AssignmentSet set;
  set.model = graph.name();
  for (int n = 1; n <= n_max; ++n) {
    std::vector<Task> tasks;
    std::vector<std::string> notes;
    if (n <= static_cast<int>(base.size())) {
      tasks = minimize_load_time(graph, base, n, profiles);
    } else {
      for (const auto& t : base) tasks.push_back(Task{0, whole_layers(t), 1, {}, {}});
      normalize(graph, tasks);
      while (devices_needed(tasks) < n) {
        auto next = choose_best(graph, tasks, n, profiles);
        if (!next) {
          notes.push_back("no transform fits the remaining " + std::to_string(n - devices_needed(tasks)) +
                          " device(s); left idle");
          break;
        }
        tasks = std::move(*next);
      }
    }
    Assignment a = make_assignment(graph, tasks, n, profiles);
    a.notes = std::move(notes);
    if (n > 1) {
      const Assignment& prev = set.by_n.back();
      if (a.predicted.ips < prev.predicted.ips * (1.0 - kRelTol)) {
        a = make_assignment(graph, prev.tasks, n, profiles);
        a.notes = prev.notes;
        a.notes.push_back("kept the " + std::to_string(n - 1) + "-device plan; splitting further lowers throughput");
      }
    }
    check_assignment(graph, a, profiles.device);
    set.by_n.push_back(std::move(a));
  }
  return set;
}

void check_assignment(const ModelGraph& graph, const Assignment& a, const DeviceProfile& device) {
  std::map<int, std::vector<std::pair<int64_t, int64_t>>> pieces;
  for (const auto& t : a.tasks) {
    for (const auto& s : t.layers) pieces[s.layer].push_back({s.part, s.count});
    const bool stateful = std::any_of(t.layers.begin(), t.layers.end(),
                                      [&](const LayerSlice& s) { return is_stateful(graph.layer(s.layer)); });
    if (t.replicas > 1 && stateful) {
      throw PlanError("task " + std::to_string(t.id) + " is replicated but keeps cross-item state");
    }
    if (t.reloading()) {
      std::vector<int> joined;
      for (const auto& seg : t.segments) {
        if (estimate_memory(graph, seg, device.overhead_factor) > device.mem_size) {
          throw PlanError("a resident set of task " + std::to_string(t.id) + " exceeds device memory");
        }
        for (const auto& s : seg) joined.push_back(s.layer);
      }
      sort_by_rank(graph, joined);
      if (joined != layer_ids(t.layers)) throw PlanError("resident sets of task " + std::to_string(t.id) + " do not match its layers");
    } else if (estimate_memory(graph, t.layers, device.overhead_factor) > device.mem_size) {
      throw PlanError("task " + std::to_string(t.id) + " exceeds device memory");
    }
  }
  for (int i = 0; i < static_cast<int>(graph.size()); ++i) {
    auto it = pieces.find(i);
    if (it == pieces.end()) throw PlanError("layer '" + graph.layer(i).name + "' is not assigned");
    auto parts = it->second;
    std::sort(parts.begin(), parts.end());
    const int64_t count = parts.front().second;
    bool ok = static_cast<int64_t>(parts.size()) == count;
    for (int64_t p = 0; ok && p < count; ++p) ok = parts[static_cast<size_t>(p)] == std::pair<int64_t, int64_t>{p, count};
    if (!ok) throw PlanError("layer '" + graph.layer(i).name + "' is not covered exactly once");
  }
  if (a.used_devices() > a.device_count) throw PlanError("more busy devices than available");
  predict(graph, a.tasks, Profiles{device, {}});
}

namespace {

using nlohmann::json;

json slice_to_json(const ModelGraph& graph, const LayerSlice& s) {
  return json{{"layer", graph.layer(s.layer).name}, {"part", s.part}, {"count", s.count}};
}

LayerSlice slice_from_json(const ModelGraph& graph, const json& j) {
  return LayerSlice{graph.index_of(j.at("layer").get<std::string>()), j.value("part", int64_t{0}),
                    j.value("count", int64_t{1})};
}

std::string slice_name(const ModelGraph& graph, const LayerSlice& s) {
  std::string name = graph.layer(s.layer).name;
  if (s.count > 1) name += "[" + std::to_string(s.part) + "/" + std::to_string(s.count) + "]";
  return name;
}

std::string describe_slices(const ModelGraph& graph, const std::vector<LayerSlice>& slices) {
  std::ostringstream out;
  if (slices.size() > 8) {
    for (size_t i = 0; i < 3; ++i) out << slice_name(graph, slices[i]) << ", ";
    out << "..., ";
    for (size_t i = slices.size() - 2; i < slices.size(); ++i) {
      out << slice_name(graph, slices[i]) << (i + 1 < slices.size() ? ", " : "");
    }
    out << " (" << slices.size() << " layers)";
    return out.str();
  }
  for (size_t i = 0; i < slices.size(); ++i) out << (i ? ", " : "") << slice_name(graph, slices[i]);
  return out.str();
}

const char* kind_label(ParallelKind k) {
  switch (k) {
    case ParallelKind::ModelSplit:
      return "model_split";
    case ParallelKind::DataReplica:
      return "data_replica";
    default:
      return "none";
  }
}

}  // namespace

json assignment_to_json(const ModelGraph& graph, const Assignment& a) {
  json tasks = json::array();
  for (const auto& t : a.tasks) {
    json layers = json::array();
    for (const auto& s : t.layers) layers.push_back(slice_to_json(graph, s));
    json segments = json::array();
    for (const auto& seg : t.segments) {
      json js = json::array();
      for (const auto& s : seg) js.push_back(slice_to_json(graph, s));
      segments.push_back(std::move(js));
    }
    json split = nullptr;
    if (t.split.active()) {
      split = json{{"layer", graph.layer(t.split.layer).name}, {"part", t.split.part}, {"count", t.split.count}};
    }
    tasks.push_back(json{{"id", t.id}, {"layers", layers}, {"replicas", t.replicas}, {"split", split},
                         {"segments", segments}});
  }
  json devices = json::array();
  for (size_t d = 0; d < a.devices.size(); ++d) {
    const Parallelism p = a.parallelism(static_cast<int>(d));
    devices.push_back(json{{"device", d},
                           {"task", a.devices[d].task},
                           {"replica", a.devices[d].replica},
                           {"parallelism", {{"kind", kind_label(p.kind)}, {"index", p.index}, {"count", p.count}}}});
  }
  json edges = json::array();
  for (const auto& e : a.edges) {
    edges.push_back(json{{"from_task", e.from_task},
                         {"to_task", e.to_task},
                         {"layer", graph.layer(e.layer).name},
                         {"part", e.part},
                         {"count", e.count},
                         {"bytes", e.bytes}});
  }
  return json{{"device_count", a.device_count},
              {"tasks", tasks},
              {"devices", devices},
              {"edges", edges},
              {"predicted",
               {{"ips", a.predicted.ips},
                {"t_forward", a.predicted.t_forward},
                {"stage_seconds", a.predicted.stage_seconds},
                {"reload_seconds", a.predicted.reload_seconds},
                {"load_seconds", a.predicted.load_seconds}}},
              {"notes", a.notes}};
}

Assignment assignment_from_json(const ModelGraph& graph, const json& doc, const Profiles& profiles) {
  try {
    std::vector<Task> tasks;
    for (const auto& jt : doc.at("tasks")) {
      Task t;
      for (const auto& js : jt.at("layers")) t.layers.push_back(slice_from_json(graph, js));
      t.replicas = jt.value("replicas", 1);
      if (jt.contains("split") && !jt.at("split").is_null()) {
        const json& s = jt.at("split");
        t.split = SplitInfo{graph.index_of(s.at("layer").get<std::string>()), s.at("part").get<int64_t>(),
                            s.at("count").get<int64_t>()};
      }
      for (const auto& seg : jt.value("segments", json::array())) {
        std::vector<LayerSlice> slices;
        for (const auto& js : seg) slices.push_back(slice_from_json(graph, js));
        t.segments.push_back(std::move(slices));
      }
      tasks.push_back(std::move(t));
    }
    Assignment a = make_assignment(graph, std::move(tasks), doc.at("device_count").get<int>(), profiles);
    a.notes = doc.value("notes", std::vector<std::string>{});
    return a;
  } catch (const json::exception& e) {
    throw PlanError(std::string("malformed plan document: ") + e.what());
  } catch (const GraphError& e) {
    throw PlanError(std::string("plan does not match the model: ") + e.what());
  }
}

json assignment_set_to_json(const ModelGraph& graph, const AssignmentSet& set) {
  json by_n = json::array();
  for (const auto& a : set.by_n) by_n.push_back(assignment_to_json(graph, a));
  return json{{"model", set.model}, {"n_max", set.by_n.size()}, {"assignments", by_n}};
}

AssignmentSet assignment_set_from_json(const ModelGraph& graph, const json& doc, const Profiles& profiles) {
  AssignmentSet set;
  set.model = doc.value("model", graph.name());
  try {
    for (const auto& a : doc.at("assignments")) set.by_n.push_back(assignment_from_json(graph, a, profiles));
  } catch (const json::exception& e) {
    throw PlanError(std::string("malformed plan document: ") + e.what());
  }
  for (size_t i = 0; i < set.by_n.size(); ++i) {
    if (set.by_n[i].device_count != static_cast<int>(i) + 1) throw PlanError("plan set must list n = 1, 2, ...");
  }
  return set;
}

std::string describe_task(const ModelGraph& graph, const Task& task) {
  if (!task.reloading()) return describe_slices(graph, task.layers);
  std::string out;
  for (size_t i = 0; i < task.segments.size(); ++i) {
    if (i) out += " | reload | ";
    out += describe_slices(graph, task.segments[i]);
  }
  return out;
}

std::string plan_table(const ModelGraph& graph, const Assignment& a) {
  std::ostringstream out;
  out << "n=" << a.device_count << "  predicted IPS " << a.predicted.ips << "  t_forward " << a.predicted.t_forward
      << " s  reload/inference " << a.predicted.reload_seconds << " s\n";
  const int recorder = a.recorder_task(graph);
  for (size_t d = 0; d < a.devices.size(); ++d) {
    const DeviceSlot& slot = a.devices[d];
    out << "  device " << d << "  ";
    if (slot.task < 0) {
      out << "(idle)\n";
      continue;
    }
    const Task& t = a.tasks[static_cast<size_t>(slot.task)];
    const Parallelism p = a.parallelism(static_cast<int>(d));
    out << "task " << t.id << (t.id == recorder ? " [recorder]" : "") << "  " << describe_task(graph, t) << "  ";
    switch (p.kind) {
      case ParallelKind::ModelSplit:
        out << "model-split " << p.index + 1 << "/" << p.count << " of " << graph.layer(t.split.layer).name;
        break;
      case ParallelKind::DataReplica:
        out << "data-replica " << p.index + 1 << "/" << p.count;
        break;
      default:
        out << (t.reloading() ? "reloading" : "-");
    }
    out << "  stage " << a.predicted.stage_seconds[static_cast<size_t>(t.id)] << " s\n";
  }
  for (const auto& note : a.notes) out << "  note: " << note << "\n";
  return out.str();
}

}  // namespace edgepart
