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

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgepart/engine.hpp"
#include "edgepart/error.hpp"
#include "edgepart/harness.hpp"
#include "edgepart/model_io.hpp"
#include "edgepart/runtime/cluster.hpp"

using namespace edgepart;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kPlanInfeasible = 2;
constexpr int kRuntimeFault = 3;

struct Globals {
  std::string model = "two_stream";
  double scale = 0.125;
  double plan_scale = 1.0;
  uint64_t seed = 1;
  std::string profile_file;
  std::string out = "reports";
  bool no_report = false;
};

Workload workload(const Globals& g) {
  Workload w;
  w.model = g.model;
  w.scale = g.scale;
  w.plan_scale = g.plan_scale;
  if (!g.profile_file.empty()) w.profiles = profiles_from_json(read_json_file(g.profile_file));
  return w;
}

void save(const Globals& g, const nlohmann::json& doc, const std::string& kind) {
  if (g.no_report) return;
  const std::string path = report_path(g.out, kind, g.model);
  write_json_file(doc, path);
  std::cout << "report: " << path << "\n";
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v(static_cast<size_t>(std::max(0, hi - lo + 1)));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

struct PlanArgs {
  int n_max = 12;
  std::vector<int> show;
};

int cmd_plan(const Globals& g, const PlanArgs& a) {
  Workload w = workload(g);
  PlannedWorkload p = plan_workload(w, a.n_max);
  std::cout << plan_dump(p.plan_graph, p.plan_set, a.show.empty() ? range(1, a.n_max) : a.show);
  save(g, assignment_set_to_json(p.plan_graph, p.plan_set), "plan");
  return kOk;
}

struct VerifyArgs {
  std::vector<int> n_list;
  int64_t frames = 0;
  std::string transport = "in_process";
  int corrupt_device = -1;
};

int cmd_verify(const Globals& g, const VerifyArgs& a) {
  VerifyOptions o;
  o.n_list = a.n_list.empty() ? range(1, 12) : a.n_list;
  o.seed = g.seed;
  o.frames = a.frames;
  o.transport = parse_transport(a.transport);
  o.corrupt_device = a.corrupt_device;
  VerifyReport r = verify(workload(g), o);
  std::cout << format_verify(r);
  save(g, to_json(r), "verify");
  for (const auto& c : r.cases) {
    if (!c.error.empty()) return kRuntimeFault;
  }
  return r.ok() ? kOk : kVerifyFailed;
}

struct RunArgs {
  std::string plan;
  int n = 0;
  std::string transport = "in_process";
  double fps = 0.0;
  int64_t frames = 0;
  bool simulate_latency = false;
  double latency_scale = 1.0;
  size_t inbox = 16;
};

int cmd_run(const Globals& g, const RunArgs& a) {
  Workload w = workload(g);
  PlannedWorkload p = a.plan.empty() ? plan_workload(w, a.n > 0 ? a.n : 5) : load_workload(w, read_json_file(a.plan));
  const int n = a.n > 0 ? a.n : static_cast<int>(p.exec_set.by_n.size());
  if (n > static_cast<int>(p.exec_set.by_n.size())) throw PlanError("plan has no entry for " + std::to_string(n) + " devices");

  ClusterOptions co;
  co.transport = parse_transport(a.transport);
  co.transport_options.simulate_latency = a.simulate_latency;
  co.transport_options.comm = w.profiles.comm;
  co.transport_options.latency_scale = a.latency_scale;
  co.inbox_capacity = a.inbox;
  const int64_t items = a.frames > 0 ? a.frames : default_frames(p.exec_graph);
  const auto frames = seeded_inputs(p.exec_graph, items, g.seed);

  Cluster cluster(p.exec_graph, p.exec_set, n, co);
  StreamResult r = cluster.run_stream(frames, a.fps);
  if (!r.ok()) {
    std::cerr << "runtime fault: " << r.error << "\n";
    return kRuntimeFault;
  }
  const double diff = max_output_diff(p.exec_graph, frames, r);
  const auto& m = r.metrics;
  std::printf("devices %d  frames %ld  kept %zu  outputs %ld  drops %ld\n", n, static_cast<long>(items), r.kept.size(),
              static_cast<long>(m.outputs), static_cast<long>(m.drops));
  std::printf("IPS %.4f  t_forward %.4f s  (compute %.4f  comm %.4f  reload %.4f)  setup %.3f s\n", m.ips,
              m.t_forward_seconds, m.breakdown.compute, m.breakdown.comm, m.breakdown.reload, m.setup_seconds);
  std::printf("max |diff| vs reference %g\n", diff);
  nlohmann::json doc{{"kind", "run"},
                     {"model", g.model},
                     {"n", n},
                     {"transport", a.transport},
                     {"fps", a.fps},
                     {"frames", items},
                     {"kept", r.kept.size()},
                     {"max_diff", std::isfinite(diff) ? diff : -1.0},
                     {"metrics", to_json(m)}};
  save(g, doc, "run");
  return diff == 0.0 ? kOk : kVerifyFailed;
}

struct BenchArgs {
  std::vector<int> n_list{1, 4, 5, 8, 10, 12};
  int64_t frames = 60;
  double fps = 30.0;
};

int cmd_bench(const Globals& g, const BenchArgs& a) {
  BenchReport r = bench(workload(g), a.n_list, a.frames, a.fps);
  std::cout << format_bench(r);
  save(g, to_json(r), "bench");
  return kOk;
}

int cmd_profile(const Globals& g, int repeats) {
  ProfileReport r = profile_kernels(workload(g).profiles, repeats);
  std::cout << format_profile(r);
  save(g, to_json(r), "profile");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partition DNN inference across a cluster of small devices."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--model", g.model, "two_stream, alexnet or vgg16")->capture_default_str();
  app.add_option("--scale", g.scale, "channel scale of the executed model")->capture_default_str();
  app.add_option("--plan-scale", g.plan_scale, "channel scale of the model used for planning")->capture_default_str();
  app.add_option("--seed", g.seed, "input seed")->capture_default_str();
  app.add_option("--profile-file", g.profile_file, "device and link profile (JSON)");
  app.add_option("--out", g.out, "report directory")->capture_default_str();
  app.add_flag("--no-report", g.no_report, "do not write a report file");

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "compute and print the plans for 1..n-max devices");
  plan->add_option("--n-max", plan_args.n_max)->capture_default_str()->check(CLI::PositiveNumber);
  plan->add_option("--n", plan_args.show, "device counts to print");

  VerifyArgs verify_args;
  auto* ver = app.add_subcommand("verify", "compare distributed outputs with the single-process reference");
  ver->add_option("--n", verify_args.n_list, "device counts (default 1..12)");
  ver->add_option("--frames", verify_args.frames, "clip length (default: window + 6)");
  ver->add_option("--transport", verify_args.transport)->capture_default_str();
  ver->add_option("--corrupt-device", verify_args.corrupt_device, "perturb one weight on this device index")
      ->group("");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run one clip through a cluster");
  run->add_option("--plan", run_args.plan, "plan file written by `plan`")->check(CLI::ExistingFile);
  run->add_option("--n", run_args.n, "device count (default: largest in plan)");
  run->add_option("--transport", run_args.transport)->capture_default_str();
  run->add_option("--fps", run_args.fps, "camera rate; 0 feeds without loss")->capture_default_str();
  run->add_option("--frames", run_args.frames, "clip length");
  run->add_flag("--simulate-latency", run_args.simulate_latency, "delay each message by the link model");
  run->add_option("--latency-scale", run_args.latency_scale)->capture_default_str();
  run->add_option("--inbox", run_args.inbox, "inbox capacity")->capture_default_str();

  BenchArgs bench_args;
  auto* ben = app.add_subcommand("bench", "simulate plans with cost-model timings");
  ben->add_option("--n", bench_args.n_list)->capture_default_str();
  ben->add_option("--frames", bench_args.frames)->capture_default_str();
  ben->add_option("--fps", bench_args.fps)->capture_default_str();

  int repeats = 3;
  auto* prof = app.add_subcommand("profile", "time the kernels and write a calibrated profile");
  prof->add_option("--repeats", repeats)->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(g, plan_args);
    if (*ver) return cmd_verify(g, verify_args);
    if (*run) return cmd_run(g, run_args);
    if (*ben) return cmd_bench(g, bench_args);
    if (*prof) return cmd_profile(g, repeats);
  } catch (const PlanError& e) {
    std::cerr << "planning infeasible: " << e.what() << "\n";
    return kPlanInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFault;
  }
  return kOk;
}
