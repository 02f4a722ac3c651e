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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "edgepart/engine.hpp"
#include "edgepart/error.hpp"
#include "edgepart/models.hpp"
#include "edgepart/partitioner.hpp"
#include "edgepart/runtime/cluster.hpp"
#include "edgepart/runtime/simulator.hpp"

using namespace edgepart;

namespace {

// Plans come from the full-size graph; execution uses the 1/8 graph.
struct Fixture {
  explicit Fixture(const std::string& model) {
    ModelGraph full = build_model(model);
    full_plans = task_assign(full, 12, Profiles{});
    small = build_model(model, {.scale = 0.125});
    plans = assignment_set_from_json(small, assignment_set_to_json(full, full_plans), Profiles{});
    full_graph = std::move(full);
  }
  ModelGraph full_graph;
  ModelGraph small;
  AssignmentSet full_plans;
  AssignmentSet plans;
};

Fixture& two_stream() {
  static Fixture f("two_stream");
  return f;
}

int64_t window_items(const ModelGraph& g) {
  int64_t first = 0;
  for (const auto& name : g.outputs()) first = std::max(first, g.first_tag(g.index_of(name)));
  return first;
}

}  // namespace

TEST(Cluster, TwoStreamEquivalenceInProcess) {
  auto& f = two_stream();
  auto frames = seeded_inputs(f.small, 30, 1);
  for (int n : {1, 5, 8, 10, 12}) {
    Cluster c(f.small, f.plans, n);
    auto r = c.run_stream(frames);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_EQ(r.outputs.size(), 30u - static_cast<size_t>(window_items(f.small))) << "n=" << n;
    EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0) << "n=" << n;
    EXPECT_EQ(r.sampling_drops, 0);
  }
}

TEST(Cluster, TwoStreamEquivalenceOverLoopback) {
  auto& f = two_stream();
  auto frames = seeded_inputs(f.small, 28, 2);
  ClusterOptions o;
  o.transport = TransportKind::Loopback;
  Cluster c(f.small, f.plans, 5, o);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_EQ(r.outputs.size(), 4u);
  EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
}

TEST(Cluster, StartupTableAndSetup) {
  auto& f = two_stream();
  ClusterOptions o;
  o.device_ids = {3, 9, 4, 7, 5};
  Cluster c(f.small, f.plans, 5, o);
  EXPECT_EQ(c.table().version, 1u);
  EXPECT_EQ(c.table().master(), 3);
  EXPECT_EQ(c.table().recorder(), 3);
  EXPECT_GT(c.setup_seconds(), 0.0);
  for (const auto& [d, s] : c.stats()) EXPECT_EQ(s.table_version, 1u) << d;

  o.device_ids = {1, 2, 2, 4, 5};
  EXPECT_THROW(Cluster(f.small, f.plans, 5, o), Error);
  o.device_ids = {1, 2};
  EXPECT_THROW(Cluster(f.small, f.plans, 5, o), Error);
}

TEST(Cluster, ZeroFramesGivesEmptyOutput) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 5);
  auto r = c.run_stream(seeded_inputs(f.small, 0, 1));
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_TRUE(r.outputs.empty());
  EXPECT_EQ(r.metrics.ips, 0.0);
  EXPECT_EQ(r.metrics.outputs, 0);
}

TEST(Cluster, ClipShorterThanWindowGivesNoOutput) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 5);
  auto frames = seeded_inputs(f.small, 10, 1);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_TRUE(r.outputs.empty());
  EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
}

TEST(Cluster, OneDeviceCyclesSegments) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 1);
  auto frames = seeded_inputs(f.small, 26, 3);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
  auto stats = c.stats();
  ASSERT_EQ(stats.size(), 1u);
  // Early tags only touch the first segment; every full item cycles.
  EXPECT_GE(stats.begin()->second.reloads, static_cast<int64_t>(r.outputs.size()));
  EXPECT_TRUE(c.assignment().tasks.front().reloading());
  EXPECT_GT(r.metrics.breakdown.reload, 0.0);
}

TEST(Cluster, ConsecutiveStreamsAreIndependent) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 8);
  for (uint64_t seed : {4u, 5u}) {
    auto frames = seeded_inputs(f.small, 27, seed);
    auto r = c.run_stream(frames);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_EQ(r.outputs.size(), 3u);
    EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
  }
}

TEST(Cluster, CorruptWeightIsDetected) {
  auto& f = two_stream();
  ClusterOptions o;
  o.corrupt_device = 2;
  Cluster c(f.small, f.plans, 5, o);
  auto frames = seeded_inputs(f.small, 26, 1);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_GT(max_output_diff(f.small, frames, r), 0.0);
}

TEST(Cluster, TraceCoversEveryLayer) {
  auto& f = two_stream();
  ClusterOptions o;
  o.trace = true;
  Cluster c(f.small, f.plans, 5, o);
  auto frames = seeded_inputs(f.small, 25, 1);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  std::map<int64_t, TensorMap> ref_trace;
  run_reference_stream(f.small, frames, &ref_trace);
  ASSERT_FALSE(r.trace.empty());
  for (const auto& [tag, pieces] : r.trace) {
    for (const auto& [key, value] : pieces) {
      const auto& name = f.small.layer(key.first).name;
      ASSERT_TRUE(ref_trace.count(tag));
      ASSERT_TRUE(ref_trace.at(tag).count(name)) << name;
    }
  }
}

TEST(Cluster, RecorderMoveSwapsTwoDevices) {
  auto& f = two_stream();
  ClusterOptions o;
  o.device_ids = {1, 2, 3, 4, 5};
  Cluster c(f.small, f.plans, 5, o);
  auto frames = seeded_inputs(f.small, 26, 2);
  ASSERT_EQ(max_output_diff(f.small, frames, c.run_stream(frames)), 0.0);

  const IPTable before = c.table();
  const auto writes_before = c.stats().at(1).master_writes;
  auto report = c.musical_chairs({ChairsTrigger::Kind::MotionOn, 3});
  EXPECT_GT(report.table.version, before.version);
  EXPECT_EQ(report.table.recorder(), 3);
  EXPECT_EQ(report.reloaded, (std::vector<int>{1, 3}));
  EXPECT_EQ(report.attempts, 1);
  EXPECT_EQ(c.stats().at(1).master_writes - writes_before, 1);
  for (const auto& [d, s] : c.stats()) EXPECT_EQ(s.table_version, report.table.version) << d;

  auto after = c.run_stream(frames);
  ASSERT_TRUE(after.ok()) << after.error;
  EXPECT_EQ(max_output_diff(f.small, frames, after), 0.0);
}

TEST(Cluster, IdenticalMappingReloadsNothing) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 5);
  const uint64_t v = c.table().version;
  auto report = c.musical_chairs({ChairsTrigger::Kind::MotionOn, c.table().recorder()});
  EXPECT_EQ(report.table.version, v + 1);
  EXPECT_TRUE(report.reloaded.empty());
}

TEST(Cluster, NonMasterUpdateIsRejected) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 5);
  IPTable forged = c.table();
  forged.version += 5;
  const int not_master = std::next(forged.entries.begin())->first;
  EXPECT_FALSE(c.propose_update(not_master, forged));
  for (const auto& [d, s] : c.stats()) {
    EXPECT_EQ(s.table_version, 1u);
    EXPECT_GE(s.rejected_updates, 1) << d;
  }
}

TEST(Cluster, DeviceLossReplansOntoSurvivors) {
  auto& f = two_stream();
  Cluster c(f.small, f.plans, 8);
  auto report = c.musical_chairs({ChairsTrigger::Kind::DeviceLost, c.devices().back()});
  EXPECT_EQ(report.table.plan_n, 7);
  auto frames = seeded_inputs(f.small, 26, 1);
  auto r = c.run_stream(frames);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
  EXPECT_THROW(c.musical_chairs({ChairsTrigger::Kind::DeviceLost, c.table().master()}), Error);
}

TEST(Cluster, PacedCameraUnderBackpressureStaysExact) {
  auto& f = two_stream();
  ClusterOptions o;
  o.inbox_capacity = 4;
  o.compute_delay_seconds = 0.002;
  o.cooldown_seconds = 0.05;
  Cluster c(f.small, f.plans, 5, o);
  auto frames = seeded_inputs(f.small, 120, 3);
  auto r = c.run_stream(frames, 1000.0);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_LE(c.peak_inbox_occupancy(), c.inbox_capacity());
  EXPECT_GT(r.camera_drops + r.sampling_drops, 0);
  EXPECT_EQ(static_cast<int64_t>(r.kept.size()) + r.camera_drops + r.sampling_drops, 120);
  EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
  for (const auto& [d, s] : c.stats()) {
    EXPECT_EQ(s.late, 0) << d;
    EXPECT_EQ(s.misrouted, 0) << d;
  }
}

TEST(Cluster, TwoStreamsOnDisjointDevices) {
  auto& f = two_stream();
  std::vector<int> all(12);
  std::iota(all.begin(), all.end(), 1);
  auto part = activate_streams({0, 1}, all);
  ASSERT_EQ(part.active.size(), 2u);
  std::vector<std::unique_ptr<Cluster>> clusters;
  for (const auto& g : part.active) {
    ClusterOptions o;
    o.device_ids = g.devices;
    clusters.push_back(std::make_unique<Cluster>(f.small, f.plans, static_cast<int>(g.devices.size()), o));
  }
  for (size_t i = 0; i < clusters.size(); ++i) {
    auto frames = seeded_inputs(f.small, 26, 10 + i);
    auto r = clusters[i]->run_stream(frames);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0);
  }
}

TEST(Cluster, AlexNetAndVggEquivalence) {
  for (const char* model : {"alexnet", "vgg16"}) {
    Fixture f(model);
    auto frames = seeded_inputs(f.small, 2, 1);
    for (int n : {1, 4, 11}) {
      Cluster c(f.small, f.plans, n);
      auto r = c.run_stream(frames);
      ASSERT_TRUE(r.ok()) << r.error;
      EXPECT_EQ(r.outputs.size(), 2u);
      EXPECT_EQ(max_output_diff(f.small, frames, r), 0.0) << model << " n=" << n;
    }
  }
}

TEST(Simulator, TwoStreamTrends) {
  auto& f = two_stream();
  double prev = 0.0;
  std::map<int, SimResult> sims;
  for (int n : {1, 4, 5, 8, 10, 12}) {
    sims[n] = simulate(f.full_graph, f.full_plans.at(n), Profiles{}, {.items = 40});
    EXPECT_GE(sims[n].metrics.ips, prev) << n;
    prev = sims[n].metrics.ips;
  }
  EXPECT_GT(sims[5].metrics.ips, 10 * sims[1].metrics.ips);
  const auto& one = sims[1].metrics;
  EXPECT_GT(one.breakdown.reload, 0.5 * one.t_forward_seconds);
}

TEST(Simulator, MetricInvariants) {
  auto& f = two_stream();
  for (int n : {1, 5, 12}) {
    auto sim = simulate(f.full_graph, f.full_plans.at(n), Profiles{}, {.items = 30, .fps = 0.0});
    const auto& m = sim.metrics;
    const auto& b = m.breakdown;
    EXPECT_GE(b.compute, 0.0);
    EXPECT_GE(b.comm, 0.0);
    EXPECT_GE(b.reload, 0.0);
    EXPECT_NEAR(b.compute + b.comm + b.reload, m.t_forward_seconds, 1e-9 * m.t_forward_seconds);
    EXPECT_EQ(m.outputs, 30 - window_items(f.full_graph));
    EXPECT_EQ(m.drops, 0);
    EXPECT_EQ(static_cast<int>(m.per_device_busy_seconds.size()), n);
    for (double busy : m.per_device_busy_seconds) EXPECT_LE(busy, m.wall_seconds + 1e-9);
    for (size_t i = 1; i < sim.output_times.size(); ++i) EXPECT_GE(sim.output_times[i], sim.output_times[i - 1]);
  }
}

TEST(Simulator, SlowCameraCapsThroughput) {
  auto& f = two_stream();
  auto sim = simulate(f.full_graph, f.full_plans.at(12), Profiles{}, {.items = 60, .fps = 0.5});
  EXPECT_LE(sim.metrics.ips, 0.5 + 1e-9);
  auto none = simulate(f.full_graph, f.full_plans.at(12), Profiles{}, {.items = 0});
  EXPECT_EQ(none.metrics.outputs, 0);
  EXPECT_EQ(none.metrics.ips, 0.0);
}
