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

#include "edgepart/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "edgepart/engine.hpp"
#include "edgepart/error.hpp"
#include "edgepart/kernels.hpp"
#include "edgepart/models.hpp"
#include "edgepart/runtime/cluster.hpp"
#include "edgepart/runtime/simulator.hpp"

namespace edgepart {

namespace {

ModelGraph build_at(const std::string& model, double scale) {
  ModelOptions o;
  o.scale = scale;
  return build_model(model, o);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Concatenates the parts of a layer present in a trace entry, in part order.
std::optional<Tensor> assemble(const std::map<std::pair<int, int64_t>, Tensor>& pieces, int layer) {
  std::vector<Tensor> parts;
  for (auto it = pieces.lower_bound({layer, 0}); it != pieces.end() && it->first.first == layer; ++it) {
    parts.push_back(it->second);
  }
  if (parts.empty()) return std::nullopt;
  if (parts.size() == 1) return parts.front();
  return forward_concat(parts, static_cast<int64_t>(parts.front().shape().rank()) - 1);
}

double abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  auto x = a.data(), y = b.data();
  for (size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
  }
  return worst;
}

std::optional<Mismatch> locate(const ModelGraph& graph, const std::map<std::string, std::vector<Tensor>>& frames,
                               const StreamResult& traced) {
  std::map<int64_t, TensorMap> ref;
  run_reference_stream(graph, frames, &ref);
  for (const auto& [tag, pieces] : traced.trace) {
    auto r = ref.find(tag);
    if (r == ref.end()) return Mismatch{tag, "", std::numeric_limits<double>::infinity()};
    for (int l = 0; l < static_cast<int>(graph.size()); ++l) {
      auto got = assemble(pieces, l);
      if (!got) continue;
      const auto& name = graph.layer(l).name;
      auto want = r->second.find(name);
      if (want == r->second.end()) continue;
      const double d = abs_diff(*got, want->second);
      if (d != 0.0) return Mismatch{tag, name, d};
    }
  }
  return std::nullopt;
}

}  // namespace

PlannedWorkload plan_workload(const Workload& w, int n_max) {
  PlannedWorkload p{build_at(w.model, w.plan_scale), build_at(w.model, w.scale), {}, {}};
  p.plan_set = task_assign(p.plan_graph, n_max, w.profiles);
  p.exec_set = assignment_set_from_json(p.exec_graph, assignment_set_to_json(p.plan_graph, p.plan_set), w.profiles);
  return p;
}

PlannedWorkload load_workload(const Workload& w, const nlohmann::json& plan_doc) {
  PlannedWorkload p{build_at(w.model, w.plan_scale), build_at(w.model, w.scale), {}, {}};
  p.plan_set = assignment_set_from_json(p.plan_graph, plan_doc, w.profiles);
  p.exec_set = assignment_set_from_json(p.exec_graph, plan_doc, w.profiles);
  return p;
}

int64_t default_frames(const ModelGraph& graph) {
  int64_t first = 0;
  for (const auto& name : graph.outputs()) first = std::max(first, graph.first_tag(graph.index_of(name)));
  return first + 6;
}

bool VerifyReport::ok() const {
  return std::all_of(cases.begin(), cases.end(), [](const VerifyCase& c) { return c.ok; });
}

VerifyReport verify(const Workload& w, const VerifyOptions& options) {
  if (options.n_list.empty()) throw Error("verify needs at least one device count");
  const int n_max = *std::max_element(options.n_list.begin(), options.n_list.end());
  PlannedWorkload p = plan_workload(w, n_max);
  const int64_t items = options.frames > 0 ? options.frames : default_frames(p.exec_graph);
  const auto frames = seeded_inputs(p.exec_graph, items, options.seed);

  VerifyReport report;
  report.model = w.model;
  for (int n : options.n_list) {
    VerifyCase vc;
    vc.n = n;
    ClusterOptions co;
    co.transport = options.transport;
    co.corrupt_device = options.corrupt_device;
    try {
      Cluster cluster(p.exec_graph, p.exec_set, n, co);
      StreamResult r = cluster.run_stream(frames);
      vc.outputs = static_cast<int64_t>(r.outputs.size());
      if (!r.ok()) {
        vc.error = r.error;
      } else {
        vc.max_diff = max_output_diff(p.exec_graph, frames, r);
        vc.ok = vc.max_diff == 0.0;
      }
    } catch (const RuntimeFault& e) {
      vc.error = e.what();
    }
    if (!vc.ok && vc.error.empty()) {
      co.trace = true;
      Cluster cluster(p.exec_graph, p.exec_set, n, co);
      vc.first_mismatch = locate(p.exec_graph, frames, cluster.run_stream(frames));
    }
    report.cases.push_back(std::move(vc));
  }
  return report;
}

EnergyReport energy_per_inference(const RunMetrics& m, const DeviceProfile& device) {
  if (m.outputs <= 0) return {};
  EnergyReport e = energy(m, std::span(&device, 1));
  e.static_joules /= static_cast<double>(m.outputs);
  e.dynamic_joules /= static_cast<double>(m.outputs);
  return e;
}

BenchReport bench(const Workload& w, const std::vector<int>& n_list, int64_t items, double fps) {
  BenchReport report;
  report.model = w.model;
  report.items = items;
  report.fps = fps;
  if (n_list.empty() || items <= 0) return report;
  const int n_max = *std::max_element(n_list.begin(), n_list.end());
  const ModelGraph graph = build_at(w.model, w.plan_scale);
  AssignmentSet set;
  try {
    set = task_assign(graph, n_max, w.profiles);
  } catch (const PlanError& e) {
    report.notes.push_back(fmt::format("no plan up to {} devices: {}", n_max, e.what()));
    return report;
  }
  for (int n : n_list) {
    if (n < 1) {
      report.notes.push_back(fmt::format("n={} skipped: no devices", n));
      continue;
    }
    BenchRow row;
    row.n = n;
    const Assignment& a = set.at(n);
    SimOptions so;
    so.items = items;
    so.fps = fps;
    row.metrics = simulate(graph, a, w.profiles, so).metrics;
    row.predicted_ips = a.predicted.ips;
    row.energy = energy_per_inference(row.metrics, w.profiles.device);
    row.plan = plan_table(graph, a);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string plan_dump(const ModelGraph& graph, const AssignmentSet& set, const std::vector<int>& n_list) {
  std::string out;
  for (int n : n_list) {
    out += plan_table(graph, set.at(n));
    out += '\n';
  }
  return out;
}

ProfileReport profile_kernels(const Profiles& base, int repeats) {
  using namespace kernels;
  ProfileReport report;
  report.calibrated = base;
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  auto fill = [&](size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
  };
  auto best_of = [&](auto&& fn) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < std::max(1, repeats); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };

  {
    const int64_t in = 4096, rows = 1024;
    auto w = fill(static_cast<size_t>(in * rows)), b = fill(rows), x = fill(in);
    std::vector<float> y(rows);
    KernelTiming k{"fc 4096x1024", 2.0 * in * rows, 0, 0};
    k.serial_seconds = best_of([&] { fc_serial(w.data(), b.data(), x.data(), in, rows, y.data()); });
    k.parallel_seconds = best_of([&] { fc_parallel(w.data(), b.data(), x.data(), in, rows, y.data()); });
    report.calibrated.device.flops_per_sec = k.flops / k.serial_seconds;
    report.kernels.push_back(k);
  }
  {
    ConvGeometry g{56, 56, 64, 3, 3, 1, 1, 1, 56, 56, 64};
    auto w = fill(static_cast<size_t>(g.filters * 9 * g.in_c)), b = fill(static_cast<size_t>(g.filters));
    auto x = fill(static_cast<size_t>(g.in_h * g.in_w * g.in_c));
    std::vector<float> y(static_cast<size_t>(g.out_h * g.out_w * g.filters));
    KernelTiming k{"conv 56x56x64 3x3x64", 2.0 * g.out_h * g.out_w * g.filters * 9 * g.in_c, 0, 0};
    k.serial_seconds = best_of([&] { conv_serial(g, w.data(), b.data(), x.data(), y.data()); });
    k.parallel_seconds = best_of([&] { conv_parallel(g, w.data(), b.data(), x.data(), y.data()); });
    report.calibrated.device.conv_flops_per_sec = k.flops / k.serial_seconds;
    report.kernels.push_back(k);
  }
  return report;
}

nlohmann::json to_json(const RunMetrics& m) {
  return {{"ips", m.ips},
          {"t_forward_seconds", m.t_forward_seconds},
          {"breakdown", {{"compute", m.breakdown.compute}, {"comm", m.breakdown.comm}, {"reload", m.breakdown.reload}}},
          {"per_device_busy_seconds", m.per_device_busy_seconds},
          {"wall_seconds", m.wall_seconds},
          {"outputs", m.outputs},
          {"drops", m.drops},
          {"setup_seconds", m.setup_seconds}};
}

nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json j{{"n", c.n}, {"outputs", c.outputs}, {"ok", c.ok}};
    j["max_diff"] = std::isfinite(c.max_diff) ? nlohmann::json(c.max_diff) : nlohmann::json("inf");
    if (c.first_mismatch) {
      const auto& m = *c.first_mismatch;
      j["first_mismatch"] = {{"tag", m.tag}, {"layer", m.layer}, {"diff", std::isfinite(m.diff) ? m.diff : -1.0}};
    }
    if (!c.error.empty()) j["error"] = c.error;
    cases.push_back(std::move(j));
  }
  return {{"kind", "verify"}, {"model", r.model}, {"ok", r.ok()}, {"cases", cases}};
}

nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"predicted_ips", row.predicted_ips},
                    {"metrics", to_json(row.metrics)},
                    {"energy_per_inference",
                     {{"static", row.energy.static_joules},
                      {"dynamic", row.energy.dynamic_joules},
                      {"total", row.energy.total()}}},
                    {"plan", row.plan}});
  }
  return {{"kind", "bench"}, {"model", r.model}, {"items", r.items}, {"fps", r.fps}, {"rows", rows}, {"notes", r.notes}};
}

nlohmann::json to_json(const ProfileReport& r) {
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& k : r.kernels) {
    kernels.push_back({{"kernel", k.kernel},
                       {"flops", k.flops},
                       {"serial_seconds", k.serial_seconds},
                       {"parallel_seconds", k.parallel_seconds}});
  }
  return {{"kind", "profile"}, {"kernels", kernels}, {"profiles", profiles_to_json(r.calibrated)}};
}

std::string format_verify(const VerifyReport& r) {
  std::string out = fmt::format("{:>4}  {:>8}  {:>12}  {}\n", "n", "outputs", "max |diff|", "result");
  for (const auto& c : r.cases) {
    std::string result = c.ok ? "equal" : "MISMATCH";
    if (!c.error.empty()) result = "fault: " + c.error;
    if (c.first_mismatch) {
      result += fmt::format(" at tag {} layer {}", c.first_mismatch->tag,
                            c.first_mismatch->layer.empty() ? "?" : c.first_mismatch->layer);
    }
    out += fmt::format("{:>4}  {:>8}  {:>12.6g}  {}\n", c.n, c.outputs, c.max_diff, result);
  }
  return out;
}

std::string format_bench(const BenchReport& r) {
  std::string out = fmt::format("{:>4}  {:>10}  {:>10}  {:>10}  {:>9}  {:>9}  {:>9}  {:>10}\n", "n", "IPS", "predicted",
                                "t_fwd s", "compute", "comm", "reload", "J/inf");
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    out += fmt::format("{:>4}  {:>10.4f}  {:>10.4f}  {:>10.3f}  {:>9.3f}  {:>9.3f}  {:>9.3f}  {:>10.3f}\n", row.n, m.ips,
                       row.predicted_ips, m.t_forward_seconds, m.breakdown.compute, m.breakdown.comm,
                       m.breakdown.reload, row.energy.total());
  }
  for (const auto& note : r.notes) out += "note: " + note + "\n";
  return out;
}

std::string format_profile(const ProfileReport& r) {
  std::string out;
  for (const auto& k : r.kernels) {
    out += fmt::format("{:<22} serial {:8.4f} s ({:6.2f} GFLOP/s)  parallel {:8.4f} s\n", k.kernel, k.serial_seconds,
                       k.flops / k.serial_seconds / 1e9, k.parallel_seconds);
  }
  return out;
}

std::string report_path(const std::string& dir, const std::string& kind, const std::string& model) {
  std::filesystem::create_directories(dir);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  std::filesystem::path base = std::filesystem::path(dir) / fmt::format("{}-{}-{}", kind, model, stamp);
  std::filesystem::path out = base.string() + ".json";
  for (int i = 1; std::filesystem::exists(out); ++i) out = fmt::format("{}-{}.json", base.string(), i);
  return out.string();
}

}  // namespace edgepart
