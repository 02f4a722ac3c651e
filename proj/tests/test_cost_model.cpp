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

#include "edgepart/cost_model.hpp"
#include "edgepart/error.hpp"
#include "edgepart/models.hpp"

using namespace edgepart;

namespace {

ModelGraph dense_chain(std::vector<int64_t> sizes) {
  ModelGraph g("dense", 1);
  g.add(LayerSpec{"in", Source{TensorShape{sizes[0]}}, {}, 1});
  std::string prev = "in";
  for (size_t i = 1; i < sizes.size(); ++i) {
    const std::string name = "fc" + std::to_string(i);
    g.add(LayerSpec{name, FullyConnected{sizes[i]}, {prev}, i});
    prev = name;
  }
  g.add(LayerSpec{"out", Sink{}, {prev}, 0});
  return validate_graph(g);
}

std::vector<LayerSlice> layers_named(const ModelGraph& g, std::vector<std::string> names) {
  std::vector<LayerSlice> out;
  for (const auto& n : names) out.push_back(LayerSlice{g.index_of(n), 0, 1});
  return out;
}

DeviceProfile no_swap() {
  DeviceProfile d;
  d.swap_threshold = 1e18;
  return d;
}

}  // namespace

TEST(EstimateMemory, EmptyTaskIsZero) {
  ModelGraph g = dense_chain({8, 4});
  EXPECT_EQ(estimate_memory(g, {}, 2.0), 0.0);
}

TEST(EstimateMemory, SingleFcClosedForm) {
  ModelGraph g = dense_chain({7680, 8192});
  const double weights = (7680.0 * 8192.0 + 8192.0) * 4.0;
  const double activations = (7680.0 + 8192.0) * 4.0;
  EXPECT_EQ(estimate_memory(g, layers_named(g, {"fc1"}), 1.0), weights + activations);
  EXPECT_EQ(estimate_memory(g, layers_named(g, {"fc1"}), 2.0), 2.0 * weights + activations);
}

TEST(EstimateMemory, DenseGroupExceedsDeviceMemory) {
  ModelGraph g = dense_chain({7680, 8192, 8192, 51});
  const auto task = layers_named(g, {"fc1", "fc2", "fc3"});
  const double params = 7680.0 * 8192 + 8192 + 8192.0 * 8192 + 8192 + 8192.0 * 51 + 51;
  EXPECT_NEAR(params, 130.4e6, 0.1e6);
  EXPECT_GT(estimate_memory(g, task, 2.0), DeviceProfile{}.mem_size);
  EXPECT_LT(estimate_memory(g, task, 1.0), DeviceProfile{}.mem_size);
}

TEST(EstimateMemory, RejectsFactorBelowOne) {
  ModelGraph g = dense_chain({8, 4});
  EXPECT_THROW(estimate_memory(g, layers_named(g, {"fc1"}), 0.5), Error);
}

TEST(EstimateCompute, FcCountsTwoOpsPerMac) {
  ModelGraph g = dense_chain({7680, 8192});
  const DeviceProfile d = no_swap();
  EXPECT_DOUBLE_EQ(estimate_compute(g, layers_named(g, {"fc1"}), d), 2.0 * 62914560.0 / d.flops_per_sec);
}

TEST(EstimateCompute, ReluIsLinearScan) {
  ModelGraph g("relu", 1);
  g.add(LayerSpec{"in", Source{TensorShape{1000}}, {}, 0});
  g.add(LayerSpec{"r", ReLU{}, {"in"}, 0});
  g = validate_graph(g);
  const DeviceProfile d;
  EXPECT_DOUBLE_EQ(estimate_compute(g, layers_named(g, {"r"}), d), 1000.0 / d.flops_per_sec);
}

TEST(EstimateCompute, SwapAppliesExactPenalty) {
  ModelGraph g = dense_chain({7680, 8192});
  DeviceProfile swapping;
  const double plain = estimate_compute(g, layers_named(g, {"fc1"}), no_swap());
  ASSERT_GT(estimate_memory(g, layers_named(g, {"fc1"}), 1.0), swapping.swap_threshold);
  EXPECT_DOUBLE_EQ(estimate_compute(g, layers_named(g, {"fc1"}), swapping), plain * swapping.swap_penalty);
}

TEST(EstimateCompute, DoublingAcrossSwapThresholdIsSuperlinear) {
  const DeviceProfile d;
  for (int64_t s : {4096, 6144, 8192}) {
    ModelGraph small = dense_chain({7680, s});
    ModelGraph big = dense_chain({7680, 2 * s});
    const double m_small = estimate_memory(small, layers_named(small, {"fc1"}), 1.0);
    const double m_big = estimate_memory(big, layers_named(big, {"fc1"}), 1.0);
    if (m_small > d.swap_threshold || m_big <= d.swap_threshold) continue;
    EXPECT_GT(estimate_compute(big, layers_named(big, {"fc1"}), d),
              2.0 * estimate_compute(small, layers_named(small, {"fc1"}), d))
        << s;
  }
}

TEST(EstimateCompute, ConvUsesConvThroughput) {
  ModelGraph g = build_model("two_stream");
  const DeviceProfile d = no_swap();
  const auto task = layers_named(g, {"s_conv2"});
  const double ops = 2.0 * 16 * 12 * 256 * 3 * 3 * 256;
  EXPECT_DOUBLE_EQ(estimate_compute(g, task, d), ops / d.conv_flops_per_sec);
}

TEST(CommLatency, FittedLine) {
  const CommModel m;
  EXPECT_NEAR(comm_latency(0, m), 0.002, 1e-12);
  EXPECT_NEAR(comm_latency(64, m), 0.0020128, 1e-12);
  EXPECT_NEAR(comm_latency(1000000, m), 0.202, 1e-12);
  EXPECT_THROW(comm_latency(-1, m), Error);
}

TEST(CommLatency, Affine) {
  const CommModel m;
  for (int64_t a : {0, 17, 4096, 123456}) {
    for (int64_t b : {0, 1, 999, 1000000}) {
      EXPECT_NEAR(comm_latency(a + b, m), comm_latency(a, m) + comm_latency(b, m) - m.base_seconds, 1e-12);
    }
  }
}

TEST(LoadTime, EmptyTaskIsSetupOnly) {
  ModelGraph g = dense_chain({8, 4});
  const DeviceProfile d;
  EXPECT_EQ(estimate_load_time(g, {}, d), d.setup_seconds);
}

TEST(LoadTime, DenseGroupAtFiftyMegabytesPerSecond) {
  ModelGraph g = dense_chain({7680, 8192, 8192, 51});
  DeviceProfile d;
  d.load_bandwidth = 50e6;
  const double t = estimate_load_time(g, layers_named(g, {"fc1", "fc2", "fc3"}), d);
  EXPECT_NEAR(t, 11.4, 0.05);
}

TEST(LoadTime, DoublingBandwidthHalvesVariableTerm) {
  ModelGraph g = dense_chain({512, 256, 10});
  DeviceProfile d;
  const auto task = layers_named(g, {"fc1", "fc2"});
  const double a = estimate_load_time(g, task, d) - d.setup_seconds;
  d.load_bandwidth *= 2;
  EXPECT_DOUBLE_EQ(estimate_load_time(g, task, d) - d.setup_seconds, a / 2);
}

TEST(Estimators, MonotoneInTaskGrowth) {
  for (const char* name : {"two_stream", "alexnet", "vgg16"}) {
    ModelGraph g = build_model(name);
    const DeviceProfile d;
    std::vector<LayerSlice> task;
    double mem = 0, compute = 0, load = estimate_load_time(g, task, d);
    for (int i : g.topo_order()) {
      task.push_back(LayerSlice{i, 0, 1});
      const double m = estimate_memory(g, task, 2.0), c = estimate_compute(g, task, d),
                   l = estimate_load_time(g, task, d);
      EXPECT_GE(m, mem);
      EXPECT_GE(c, compute);
      EXPECT_GE(l, load);
      mem = m;
      compute = c;
      load = l;
    }
  }
}

TEST(PartRows, EarlierPartsTakeTheLargerShare) {
  EXPECT_EQ(part_rows(8192, 0, 2), (std::pair<int64_t, int64_t>{0, 4096}));
  EXPECT_EQ(part_rows(8192, 1, 2), (std::pair<int64_t, int64_t>{4096, 8192}));
  EXPECT_EQ(part_rows(10, 0, 3), (std::pair<int64_t, int64_t>{0, 4}));
  EXPECT_EQ(part_rows(10, 2, 3), (std::pair<int64_t, int64_t>{7, 10}));
  EXPECT_EQ(part_rows(4, 2, 3), (std::pair<int64_t, int64_t>{3, 4}));
  EXPECT_THROW(part_rows(3, 0, 4), Error);
}

TEST(Energy, StaticAndDynamicExamples) {
  const DeviceProfile d;
  RunMetrics idle;
  idle.wall_seconds = 10.0;
  idle.per_device_busy_seconds.assign(5, 0.0);
  EnergyReport r = energy(idle, std::vector<DeviceProfile>{d});
  EXPECT_NEAR(r.static_joules, 65.0, 1e-9);
  EXPECT_EQ(r.dynamic_joules, 0.0);

  RunMetrics busy;
  busy.wall_seconds = 10.0;
  busy.per_device_busy_seconds = {10.0};
  r = energy(busy, std::vector<DeviceProfile>{d});
  EXPECT_NEAR(r.dynamic_joules, 17.0, 1e-9);
  EXPECT_NEAR(r.total(), 30.0, 1e-9);
}

TEST(Energy, BusyBeyondWallRejected) {
  RunMetrics m;
  m.wall_seconds = 1.0;
  m.per_device_busy_seconds = {2.0};
  EXPECT_THROW(energy(m, std::vector<DeviceProfile>{DeviceProfile{}}), Error);
}

TEST(Profiles, JsonRoundTripAndValidation) {
  Profiles p;
  p.device.flops_per_sec = 3e9;
  p.comm.base_seconds = 0.01;
  Profiles back = profiles_from_json(profiles_to_json(p));
  EXPECT_EQ(back.device.flops_per_sec, 3e9);
  EXPECT_EQ(back.comm.base_seconds, 0.01);
  EXPECT_EQ(profiles_from_json(nlohmann::json::object()).device.mem_size, DeviceProfile{}.mem_size);
  EXPECT_THROW(profiles_from_json(nlohmann::json::parse(R"({"device":{"swap_penalty":0.5}})")), Error);
  EXPECT_THROW(profiles_from_json(nlohmann::json::parse(R"({"device":{"power":{"observed_watts":9}}})")), Error);
}
