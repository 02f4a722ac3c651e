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

// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "edgepart/cost_model.hpp"
#include "edgepart/engine.hpp"
#include "edgepart/error.hpp"
#include "edgepart/harness.hpp"
#include "edgepart/models.hpp"
#include "edgepart/partitioner.hpp"
#include "edgepart/runtime/cluster.hpp"
#include "edgepart/runtime/inbox.hpp"
#include "edgepart/runtime/simulator.hpp"

using namespace edgepart;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr double kCommTolerance = 1e-12;
constexpr double kEnergyTolerance = 1e-9;
constexpr double kSpeedupFloor = 10.0;
constexpr double kReloadShareFloor = 0.5;

const Task* task_of(const Assignment& a, int layer, int64_t part = 0) {
  for (const auto& t : a.tasks) {
    for (const auto& s : t.layers) {
      if (s.layer == layer && s.part == part) return &t;
    }
  }
  return nullptr;
}

bool whole(const Task& t, int layer) {
  for (const auto& s : t.layers) {
    if (s.layer == layer) return s.count == 1;
  }
  return false;
}

// Rows held by each model-split part of `layer`, in part order.
std::vector<int64_t> split_rows(const ModelGraph& g, const Assignment& a, const std::string& layer) {
  const int l = g.index_of(layer);
  const int64_t out = std::get<FullyConnected>(g.layer(l).kind).out_size;
  std::vector<int64_t> rows;
  for (const auto& t : a.tasks) {
    if (t.split.layer != l) continue;
    auto [b, e] = part_rows(out, t.split.part, t.split.count);
    rows.push_back(e - b);
  }
  return rows;
}

std::vector<int> replica_counts(const ModelGraph& g, const Assignment& a, const std::vector<std::string>& layers) {
  std::vector<int> out;
  for (const auto& name : layers) {
    const Task* t = task_of(a, g.index_of(name));
    out.push_back(t ? t->replicas : 0);
  }
  return out;
}

Outcome c1_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    const char* model;
    int64_t frames;
  };
  std::vector<int> all(12);
  std::iota(all.begin(), all.end(), 1);
  int runs = 0;
  double worst = 0.0;
  std::string where;
  for (const Case& c : {Case{"two_stream", 30}, Case{"alexnet", 3}, Case{"vgg16", 2}}) {
    Workload w;
    w.model = c.model;
    w.scale = 0.125;
    for (uint64_t seed : {1u, 2u, 3u}) {
      VerifyOptions o;
      o.n_list = all;
      o.seed = seed;
      o.frames = c.frames;
      VerifyReport r = verify(w, o);
      for (const auto& vc : r.cases) {
        ++runs;
        worst = std::max(worst, vc.error.empty() ? vc.max_diff : std::numeric_limits<double>::infinity());
        if (!vc.ok && where.empty()) {
          where = fmt::format("first failure {} seed {} n={}{}", c.model, seed, vc.n,
                              vc.error.empty() ? "" : ": " + vc.error);
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = worst == 0.0 && where.empty() && secs < 300.0;
  return {pass, fmt::format("{} runs, max |diff| {:g}, {:.1f} s{}", runs, worst, secs, where.empty() ? "" : ", " + where)};
}

Outcome c2_two_stream_structure() {
  const ModelGraph g = build_model("two_stream");
  const AssignmentSet set = task_assign(g, 12, Profiles{});
  std::vector<std::string> bad;
  const int fc1 = g.index_of("fc_1"), fc2 = g.index_of("fc_2"), fc3 = g.index_of("fc_3");
  {
    const Assignment& a = set.at(5);
    const Task* t1 = task_of(a, fc1);
    const Task* t2 = task_of(a, fc2);
    const bool ok = t1 && t2 && t1 != t2 && whole(*t1, fc1) && whole(*t2, fc2) && t2->contains(fc3) &&
                    !t1->contains(fc2) && !t1->contains(fc3) && t1->replicas == 1 && t2->replicas == 1;
    if (!ok) bad.push_back("n=5 dense split");
  }
  {
    const Assignment& a = set.at(8);
    if (split_rows(g, a, "fc_1") != std::vector<int64_t>{4096, 4096}) bad.push_back("n=8 fc_1");
    if (split_rows(g, a, "fc_2") != std::vector<int64_t>{4096, 4096}) bad.push_back("n=8 fc_2");
  }
  if (replica_counts(g, set.at(10), {"s_conv1", "t_conv1"}) != std::vector<int>{2, 2}) bad.push_back("n=10 streams");
  if (replica_counts(g, set.at(12), {"s_conv1", "t_conv1"}) != std::vector<int>{3, 3}) bad.push_back("n=12 streams");
  for (int n : {5, 8, 10, 12}) {
    if (set.at(n).used_devices() != n) bad.push_back(fmt::format("n={} uses {}", n, set.at(n).used_devices()));
  }
  std::string detail = "n=5 8k|8k+51, n=8 4k+4k per fc, n=10 x2, n=12 x3";
  for (const auto& b : bad) detail += "; wrong: " + b;
  return {bad.empty(), detail};
}

Outcome c3_alexnet_vgg_structure() {
  std::vector<std::string> bad;
  {
    const ModelGraph g = build_model("alexnet");
    const auto set = task_assign(g, 4, Profiles{});
    if (split_rows(g, set.at(4), "fc_1").size() < 2) bad.push_back("alexnet n=4 fc_1 not split");
  }
  {
    const ModelGraph g = build_model("vgg16");
    const auto set = task_assign(g, 11, Profiles{});
    const Assignment& a = set.at(11);
    for (int b = 1; b <= 5; ++b) {
      const std::string block = "block" + std::to_string(b);
      const Task* home = nullptr;
      bool ok = true;
      for (int l = 0; l < static_cast<int>(g.size()); ++l) {
        if (g.layer(l).name.rfind(block + "_", 0) != 0) continue;
        const Task* t = task_of(a, l);
        if (!t || !whole(*t, l) || t->split.active() || (home && t != home)) ok = false;
        home = t;
      }
      if (!ok) bad.push_back(block + " not on one device");
    }
    if (split_rows(g, a, "fc_1").size() < 2) bad.push_back("vgg16 fc_1 not split");
    const Task* t2 = task_of(a, g.index_of("fc_2"));
    if (!t2 || !t2->contains(g.index_of("fc_3")) || t2->replicas != 1 || t2->split.active() ||
        !whole(*t2, g.index_of("fc_2"))) {
      bad.push_back("vgg16 fc_2/fc_3 not together");
    }
  }
  std::string detail = "alexnet n=4 fc_1 split; vgg16 n=11 blocks whole, fc_1 split, fc_2+fc_3 together";
  for (const auto& b : bad) detail += "; wrong: " + b;
  return {bad.empty(), detail};
}

Outcome c4_monotone_throughput() {
  const ModelGraph g = build_model("two_stream");
  const AssignmentSet set = task_assign(g, 12, Profiles{});
  double prev_pred = 0.0, prev_sim = 0.0, ips1 = 0.0, ips5 = 0.0;
  bool monotone = true;
  std::string series;
  for (int n : {1, 4, 5, 8, 10, 12}) {
    const double pred = set.at(n).predicted.ips;
    const double sim = simulate(g, set.at(n), Profiles{}, {.items = 60}).metrics.ips;
    monotone = monotone && pred >= prev_pred && sim >= prev_sim;
    prev_pred = pred;
    prev_sim = sim;
    if (n == 1) ips1 = sim;
    if (n == 5) ips5 = sim;
    series += fmt::format("{}{}:{:.4f}", series.empty() ? "" : " ", n, sim);
  }
  const double ratio = ips5 / ips1;
  return {monotone && ratio > kSpeedupFloor, fmt::format("simulated IPS {}; n=5/n=1 = {:.1f}x", series, ratio)};
}

Outcome c5_reload_dominance() {
  const ModelGraph g = build_model("two_stream");
  const AssignmentSet set = task_assign(g, 1, Profiles{});
  const auto m = simulate(g, set.at(1), Profiles{}, {.items = 40}).metrics;
  const double share = m.breakdown.reload / m.t_forward_seconds;
  return {share > kReloadShareFloor,
          fmt::format("reload {:.2f} s of t_forward {:.2f} s ({:.1f}%)", m.breakdown.reload, m.t_forward_seconds,
                      100 * share)};
}

Outcome c6_fc_split_exactness() {
  std::mt19937_64 rng(2026);
  const int64_t max_dim = 4096;
  // Weights for each trial are the top-left block of one shared matrix.
  std::vector<float> pool(static_cast<size_t>(max_dim * max_dim));
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  for (auto& v : pool) v = dist(rng);
  std::uniform_int_distribution<int64_t> dim(4, max_dim);
  std::uniform_int_distribution<int64_t> parts(2, 4);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t in = dim(rng), out = dim(rng), k = parts(rng);
    ModelGraph g("fc", 1);
    g.add(LayerSpec{"in", Source{TensorShape{in}}, {}, 0});
    g.add(LayerSpec{"fc", FullyConnected{out}, {"in"}, 0});
    g = validate_graph(g);
    std::vector<Task> base{Task{0, whole_layers(std::vector<int>{0, 1}), 1, {}, {}}};
    const auto tasks = split_fc(g, base, 0, 1, k);

    LayerParams full;
    std::vector<float> w(static_cast<size_t>(in * out));
    for (int64_t r = 0; r < out; ++r) {
      std::memcpy(w.data() + r * in, pool.data() + r * max_dim, static_cast<size_t>(in) * sizeof(float));
    }
    full.weights = Tensor(TensorShape{out, in}, std::move(w));
    std::vector<float> bias(pool.end() - out, pool.end());
    full.bias = Tensor(TensorShape{out}, std::move(bias));
    Tensor x(TensorShape{in});
    for (auto& v : x.mutable_data()) v = dist(rng);

    std::vector<Tensor> pieces;
    for (const auto& t : tasks) {
      for (const auto& s : t.layers) {
        if (s.layer != 1) continue;
        auto [b, e] = part_rows(out, s.part, s.count);
        pieces.push_back(forward_fc(x, slice_params(full, b, e)));
      }
    }
    if (static_cast<int64_t>(pieces.size()) != k || !(forward_concat(pieces, 0) == forward_fc(x, full))) ++failures;
  }
  return {failures == 0, fmt::format("1000 layers, {} mismatches", failures)};
}

Outcome c7_comm_model() {
  const CommModel m;
  const double zero = comm_latency(0, m);
  const double mb = comm_latency(1'000'000, m);
  const bool pass = std::abs(zero - 0.002) <= kCommTolerance && std::abs(mb - 0.202) <= kCommTolerance;
  return {pass, fmt::format("0 B -> {:.15g} s, 1 MB -> {:.15g} s (tol {:g})", zero, mb, kCommTolerance)};
}

Outcome c8_backpressure() {
  // Inbox level: 1000 items pushed ten times faster than they are taken.
  BoundedInbox<int> box(10);
  const int items = 1000;
  std::thread producer([&] {
    for (int i = 0; i < items; ++i) {
      box.push(i);
      std::this_thread::sleep_for(std::chrono::microseconds(10));
    }
  });
  size_t worst = 0;
  bool ordered = true;
  for (int i = 0; i < items; ++i) {
    std::this_thread::sleep_for(std::chrono::microseconds(100));
    auto v = box.pop();
    ordered = ordered && v && *v == i;
    worst = std::max(worst, box.occupancy());
  }
  producer.join();
  const bool inbox_ok = ordered && box.peak() <= box.capacity() && worst <= box.capacity();

  // Pipeline level: a camera at ten times the pipeline's pace.
  const ModelGraph full = build_model("two_stream");
  const AssignmentSet full_set = task_assign(full, 5, Profiles{});
  const ModelGraph small = build_model("two_stream", {.scale = 0.125});
  const AssignmentSet set = assignment_set_from_json(small, assignment_set_to_json(full, full_set), Profiles{});
  ClusterOptions o;
  o.inbox_capacity = 10;
  o.compute_delay_seconds = 0.004;
  o.cooldown_seconds = 0.1;
  Cluster c(small, set, 5, o);
  const double consumer_rate = 1.0 / o.compute_delay_seconds;
  const auto frames = seeded_inputs(small, items, 8);
  const StreamResult r = c.run_stream(frames, 10.0 * consumer_rate);
  int64_t late = 0, misrouted = 0;
  for (const auto& [d, s] : c.stats()) {
    late += s.late;
    misrouted += s.misrouted;
  }
  const int64_t window = small.first_tag(small.index_of("output"));
  const int64_t kept = static_cast<int64_t>(r.kept.size());
  const bool drained = r.ok() && static_cast<int64_t>(r.outputs.size()) == std::max<int64_t>(0, kept - window);
  const double diff = r.ok() ? max_output_diff(small, frames, r) : std::numeric_limits<double>::infinity();
  const bool accounted = kept + r.camera_drops + r.sampling_drops == items;
  const bool pass = inbox_ok && c.peak_inbox_occupancy() <= c.inbox_capacity() && late == 0 && misrouted == 0 &&
                    drained && diff == 0.0 && accounted && kept < items;
  return {pass, fmt::format("inbox peak {}/10; cluster peak {}/{}, kept {} of {}, camera drops {}, sampling drops {}, "
                            "outputs {}, late {}, max |diff| {:g}",
                            box.peak(), c.peak_inbox_occupancy(), c.inbox_capacity(), kept, items, r.camera_drops,
                            r.sampling_drops, r.outputs.size(), late, diff)};
}

Outcome c9_musical_chairs() {
  const ModelGraph full = build_model("two_stream");
  const AssignmentSet full_set = task_assign(full, 5, Profiles{});
  const ModelGraph small = build_model("two_stream", {.scale = 0.125});
  const AssignmentSet set = assignment_set_from_json(small, assignment_set_to_json(full, full_set), Profiles{});
  ClusterOptions o;
  o.device_ids = {1, 2, 3, 4, 5};
  Cluster c(small, set, 5, o);
  const auto frames = seeded_inputs(small, 28, 9);
  const double before_diff = max_output_diff(small, frames, c.run_stream(frames));
  const IPTable before = c.table();
  const int64_t writes0 = c.stats().at(before.master()).master_writes;
  const ChairsReport rep = c.musical_chairs({ChairsTrigger::Kind::MotionOn, 3});
  const int64_t writes = c.stats().at(before.master()).master_writes - writes0;
  const StreamResult after = c.run_stream(frames);
  const double after_diff = after.ok() ? max_output_diff(small, frames, after) : std::numeric_limits<double>::infinity();
  bool converged = true;
  for (const auto& [d, s] : c.stats()) converged = converged && s.table_version == rep.table.version;
  const bool pass = before.recorder() == 1 && rep.table.recorder() == 3 && rep.table.version > before.version &&
                    writes == 1 && rep.reloaded == std::vector<int>{1, 3} && converged && before_diff == 0.0 &&
                    after_diff == 0.0 && after.outputs.size() == 4;
  std::string reloaded;
  for (int d : rep.reloaded) reloaded += (reloaded.empty() ? "" : ",") + std::to_string(d);
  return {pass, fmt::format("version {}->{}, master writes {}, reloaded [{}], setup {:.3f} s, post-swap max |diff| {:g}",
                            before.version, rep.table.version, writes, reloaded, rep.setup_seconds, after_diff)};
}

// Independent range-max oracle for a 4-level pyramid.
std::vector<float> pyramid_oracle(const std::vector<std::vector<float>>& frames, int levels) {
  const int64_t n = static_cast<int64_t>(frames.size());
  const size_t width = frames[0].size();
  std::vector<float> out;
  for (int k = 0; k < levels; ++k) {
    const int64_t ranges = int64_t{1} << k;
    const int64_t base = n / ranges, rem = n % ranges;
    for (int64_t r = 0; r < ranges; ++r) {
      const int64_t lo = r * base + std::min(r, rem);
      const int64_t len = base + (r < rem ? 1 : 0);
      for (size_t j = 0; j < width; ++j) {
        if (len == 0) {
          out.push_back(frames[static_cast<size_t>(std::min(lo, n - 1))][j]);
          continue;
        }
        float m = frames[static_cast<size_t>(lo)][j];
        for (int64_t i = lo + 1; i < lo + len; ++i) m = std::max(m, frames[static_cast<size_t>(i)][j]);
        out.push_back(m);
      }
    }
  }
  return out;
}

Outcome c10_pyramid_oracle() {
  std::mt19937 rng(10);
  std::uniform_int_distribution<int> length(1, 64), width(1, 9);
  std::normal_distribution<float> value(0.f, 1.f);
  int failures = 0, wrong_rows = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = length(rng);
    const int w = width(rng);
    std::vector<std::vector<float>> raw(static_cast<size_t>(n), std::vector<float>(static_cast<size_t>(w)));
    std::vector<Tensor> frames;
    for (auto& f : raw) {
      for (auto& v : f) v = value(rng);
      frames.emplace_back(TensorShape{w}, f);
    }
    const Tensor y = temporal_pyramid(frames, 4);
    if (y.shape() != TensorShape{15, w}) {
      ++wrong_rows;
      continue;
    }
    const auto want = pyramid_oracle(raw, 4);
    if (!std::equal(want.begin(), want.end(), y.data().begin(), y.data().end())) ++failures;
  }
  return {failures == 0 && wrong_rows == 0,
          fmt::format("500 sequences, {} value mismatches, {} wrong shapes", failures, wrong_rows)};
}

Outcome c11_energy() {
  RunMetrics m;
  m.wall_seconds = 20.0;
  m.per_device_busy_seconds = {20.0, 7.5, 0.0};
  DeviceProfile d;
  d.power.idle_watts = 1.3;
  d.power.observed_watts = 3.0;
  const EnergyReport e = energy(m, std::span(&d, 1));
  const double want_static = 1.3 * 20.0 * 3;
  const double want_dynamic = (3.0 - 1.3) * (20.0 + 7.5 + 0.0);
  const bool pass = std::abs(e.static_joules - want_static) <= kEnergyTolerance &&
                    std::abs(e.dynamic_joules - want_dynamic) <= kEnergyTolerance &&
                    std::abs(e.total() - want_static - want_dynamic) <= kEnergyTolerance;
  return {pass, fmt::format("static {:.9f} J (want {:.9f}), dynamic {:.9f} J (want {:.9f})", e.static_joules,
                            want_static, e.dynamic_joules, want_dynamic)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "oracle equivalence", c1_oracle_equivalence},
      {2, "two_stream plan structure", c2_two_stream_structure},
      {3, "alexnet/vgg16 plan structure", c3_alexnet_vgg_structure},
      {4, "monotone throughput", c4_monotone_throughput},
      {5, "reload dominance on one device", c5_reload_dominance},
      {6, "fc split exactness", c6_fc_split_exactness},
      {7, "comm model", c7_comm_model},
      {8, "backpressure safety", c8_backpressure},
      {9, "musical chairs", c9_musical_chairs},
      {10, "temporal pyramid oracle", c10_pyramid_oracle},
      {11, "energy accounting", c11_energy},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %-32s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
