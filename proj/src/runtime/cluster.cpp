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

#include "edgepart/runtime/cluster.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

template <typename T>
T get(std::span<const uint8_t> bytes, size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error("truncated control payload");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

double total(const LatencyBreakdown& b) { return b.compute + b.comm + b.reload; }

}  // namespace

// Gathers output pieces per tag and the recorder's end-of-clip report.
class Cluster::Collector {
 public:
  struct Arrival {
    double received = 0.0;
    double origin = 0.0;
    LatencyBreakdown path;
  };

  explicit Collector(const ModelGraph& graph) : graph_(graph), inbox_(1 << 16) {}
  ~Collector() { stop(); }

  Inbox& inbox() { return inbox_; }
  void start() {
    thread_ = std::thread([this] { loop(); });
  }
  void stop() {
    inbox_.close();
    if (thread_.joinable()) thread_.join();
  }

  void begin(uint16_t stream, int64_t output_from) {
    std::lock_guard lock(mu_);
    stream_ = stream;
    output_from_ = output_from;
    pieces_.clear();
    outputs_.clear();
    arrivals_.clear();
    trace_.clear();
    kept_.clear();
    ended_ = false;
    sampling_drops_ = 0;
  }

  // True once the clip ended and every kept tag has its outputs.
  bool wait_for(double seconds) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return done_locked(); });
  }

  void fill(StreamResult& r) {
    std::lock_guard lock(mu_);
    r.outputs = outputs_;
    r.kept = kept_;
    r.trace = trace_;
    r.sampling_drops = sampling_drops_;
    std::vector<double> received;
    LatencyBreakdown sum;
    double forward = 0.0;
    for (const auto& [tag, a] : arrivals_) {
      received.push_back(a.received);
      forward += a.received - a.origin;
      sum.compute += a.path.compute;
      sum.comm += a.path.comm;
      sum.reload += a.path.reload;
    }
    RunMetrics& m = r.metrics;
    m.outputs = static_cast<int64_t>(arrivals_.size());
    if (m.outputs > 0) {
      const double n = static_cast<double>(m.outputs);
      m.t_forward_seconds = forward / n;
      m.breakdown = LatencyBreakdown{sum.compute / n, sum.comm / n, sum.reload / n};
    }
    if (m.outputs > 1) {
      const auto [lo, hi] = std::minmax_element(received.begin(), received.end());
      if (*hi > *lo) m.ips = static_cast<double>(m.outputs - 1) / (*hi - *lo);
    }
  }

 private:
  bool done_locked() const {
    if (!ended_) return false;
    const int64_t kept = static_cast<int64_t>(kept_.size());
    return static_cast<int64_t>(outputs_.size()) >= std::max<int64_t>(0, kept - output_from_);
  }

  void loop() {
    while (auto m = inbox_.pop()) {
      try {
        handle(*m);
      } catch (const std::exception&) {
        // Malformed collector input is dropped.
      }
    }
  }

  void handle(const Message& m) {
    std::lock_guard lock(mu_);
    if (m.stream_id != stream_) return;
    const int64_t tag = static_cast<int64_t>(m.tag);
    if (m.kind == MessageKind::Heartbeat) {
      size_t pos = 0;
      sampling_drops_ = static_cast<int64_t>(get<uint64_t>(m.payload, pos));
      kept_.clear();
      while (pos < m.payload.size()) kept_.push_back(static_cast<int64_t>(get<uint64_t>(m.payload, pos)));
      ended_ = true;
      cv_.notify_all();
      return;
    }
    if (m.kind != MessageKind::Data) return;
    Bundle b = decode_bundle(m.payload);
    if (m.dest_role == kTraceRole) {
      for (auto& p : b.pieces) trace_[tag][{p.layer, p.part}] = std::move(p.value);
      return;
    }
    if (m.dest_role != kCollectorRole || tag < output_from_) return;
    auto& slot = pieces_[tag];
    for (auto& p : b.pieces) slot[p.layer][p.part] = std::make_pair(p.count, std::move(p.value));
    const double now = monotonic_seconds();
    auto& path = path_[tag];
    LatencyBreakdown candidate = b.path;
    candidate.comm += std::max(0.0, now - b.sent_at);
    if (total(candidate) > total(path)) path = candidate;

    TensorMap out;
    for (const auto& name : graph_.outputs()) {
      auto it = slot.find(graph_.index_of(name));
      if (it == slot.end()) return;
      const int64_t count = it->second.begin()->second.first;
      if (static_cast<int64_t>(it->second.size()) < count) return;
      if (count == 1) {
        out[name] = it->second.begin()->second.second;
      } else {
        std::vector<Tensor> parts;
        for (const auto& [part, v] : it->second) parts.push_back(v.second);
        out[name] = forward_concat(parts, static_cast<int64_t>(parts.front().shape().rank()) - 1);
      }
    }
    outputs_[tag] = std::move(out);
    arrivals_[tag] = Arrival{now, b.origin, path};
    pieces_.erase(tag);
    path_.erase(tag);
    cv_.notify_all();
  }

  const ModelGraph& graph_;
  Inbox inbox_;
  std::thread thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  uint16_t stream_ = 0;
  int64_t output_from_ = 0;
  std::map<int64_t, std::map<int, std::map<int64_t, std::pair<int64_t, Tensor>>>> pieces_;
  std::map<int64_t, LatencyBreakdown> path_;
  std::map<int64_t, TensorMap> outputs_;
  std::map<int64_t, Arrival> arrivals_;
  std::map<int64_t, std::map<std::pair<int, int64_t>, Tensor>> trace_;
  std::vector<int64_t> kept_;
  int64_t sampling_drops_ = 0;
  bool ended_ = false;
};

Cluster::Cluster(const ModelGraph& graph, const AssignmentSet& plans, int n, ClusterOptions options)
    : graph_(graph), plans_(plans), options_(std::move(options)), controller_(1 << 12) {
  if (!graph.validated()) throw GraphError("cluster needs a validated graph");
  if (n < 1) throw Error("cluster needs at least one device");
  if (options_.device_ids.empty()) {
    for (int d = 0; d < n; ++d) options_.device_ids.push_back(d);
  }
  if (static_cast<int>(options_.device_ids.size()) != n) throw Error("device id count does not match n");
  if (std::set<int>(options_.device_ids.begin(), options_.device_ids.end()).size() != options_.device_ids.size()) {
    throw Error("duplicate device id");
  }
  plans_.at(n);

  net_ = make_transport(options_.transport, options_.transport_options);
  controller_address_ = net_->attach(kControllerId, controller_);
  collector_ = std::make_unique<Collector>(graph_);
  const std::string collector_address = net_->attach(kCollectorRole, collector_->inbox());
  collector_->start();

  std::vector<std::string> addresses;
  for (int d : options_.device_ids) {
    WorkerConfig cfg;
    cfg.device = d;
    cfg.graph = &graph_;
    cfg.plans = &plans_;
    cfg.net = net_.get();
    cfg.collector_address = collector_address;
    cfg.controller_address = controller_address_;
    cfg.inbox_capacity = options_.inbox_capacity;
    auto delay = options_.device_delay_seconds.find(d);
    cfg.compute_delay = delay == options_.device_delay_seconds.end() ? options_.compute_delay_seconds : delay->second;
    cfg.cooldown_seconds = options_.cooldown_seconds;
    cfg.max_sampling_divisor = options_.max_sampling_divisor;
    cfg.corrupt = d == options_.corrupt_device;
    cfg.trace = options_.trace;
    auto w = std::make_unique<Worker>(cfg);
    addresses.push_back(net_->attach(d, w->inbox()));
    workers_[d] = std::move(w);
  }
  table_ = initial_table(graph_, plans_, options_.device_ids, addresses);
  for (auto& [d, w] : workers_) w->start();

  send_command(table_.master(), Command::BroadcastTable, encode_table(table_));
  const auto acks = await_acks(table_.version, workers_.size(), options_.timeout_seconds);
  if (acks.size() < workers_.size()) {
    std::string why = "workers did not report ready";
    for (auto& [d, w] : workers_) {
      if (w->failed()) why = w->error();
    }
    stop();
    throw RuntimeFault(why);
  }
  for (const auto& [device, ack] : acks) setup_seconds_ = std::max(setup_seconds_, ack.first);
}

Cluster::~Cluster() { stop(); }

void Cluster::stop() {
  if (stopped_) return;
  stopped_ = true;
  for (auto& [d, w] : workers_) w->inbox().close();
  for (auto& [d, w] : workers_) w->stop();
  collector_->stop();
  controller_.close();
  net_->shutdown();
}

std::vector<int> Cluster::devices() const {
  std::vector<int> out;
  for (const auto& [d, e] : table_.entries) out.push_back(d);
  return out;
}

std::map<int, WorkerStats> Cluster::stats() const {
  std::map<int, WorkerStats> out;
  for (const auto& [d, w] : workers_) out[d] = w->stats();
  return out;
}

size_t Cluster::peak_inbox_occupancy() const {
  size_t peak = 0;
  for (const auto& [d, w] : workers_) peak = std::max(peak, const_cast<Worker&>(*w).inbox().peak());
  return peak;
}

void Cluster::send_command(int device, Command c, std::vector<uint8_t> payload) {
  Message m;
  m.kind = MessageKind::Heartbeat;
  m.tag = static_cast<uint64_t>(c);
  m.source = kControllerId;
  m.payload = std::move(payload);
  if (!net_->send(table_.entries.at(device).address, m)) {
    throw RuntimeFault("cannot reach device " + std::to_string(device));
  }
}

std::vector<std::pair<uint64_t, std::pair<double, bool>>> Cluster::await_acks(uint64_t version, size_t count,
                                                                              double timeout) {
  std::map<uint64_t, std::pair<double, bool>> acks;
  const double deadline = monotonic_seconds() + timeout;
  while (acks.size() < count) {
    const double left = deadline - monotonic_seconds();
    if (left <= 0.0) break;
    auto m = controller_.pop_for(std::chrono::duration<double>(std::min(left, 0.05)));
    if (!m) {
      bool dead = false;
      for (auto& [d, w] : workers_) dead = dead || (w->failed() && table_.entries.count(d));
      if (dead) break;
      continue;
    }
    if (m->kind != MessageKind::Heartbeat || m->tag != version) continue;
    size_t pos = 0;
    const double seconds = get<double>(m->payload, pos);
    const bool reloaded = get<uint8_t>(m->payload, pos) != 0;
    acks[m->source] = {seconds, reloaded};
  }
  return {acks.begin(), acks.end()};
}

void Cluster::check_workers() const {
  if (stopped_) throw RuntimeFault("cluster is stopped");
  for (const auto& [d, e] : table_.entries) {
    const Worker& w = *workers_.at(d);
    if (w.failed()) throw RuntimeFault(w.error());
  }
}

StreamResult Cluster::run_stream(const std::map<std::string, std::vector<Tensor>>& frames, double fps) {
  check_workers();
  StreamResult result;
  const int recorder = table_.recorder();
  if (recorder < 0) throw RuntimeFault("no device holds the recorder role");
  int64_t items = -1;
  for (const auto& src : graph_.inputs()) {
    auto it = frames.find(src);
    if (it == frames.end()) throw Error("missing frames for source '" + src + "'");
    items = items < 0 ? static_cast<int64_t>(it->second.size()) : std::min<int64_t>(items, it->second.size());
  }
  items = std::max<int64_t>(items, 0);
  int64_t output_from = 0;
  for (const auto& name : graph_.outputs()) output_from = std::max(output_from, graph_.first_tag(graph_.index_of(name)));

  ++stream_;
  collector_->begin(stream_, output_from);
  const auto before = stats();
  Worker& rec = *workers_.at(recorder);
  const uint16_t rec_role = static_cast<uint16_t>(table_.role_of(recorder));
  Message start;
  start.kind = MessageKind::Heartbeat;
  start.stream_id = stream_;
  start.source = kCameraId;
  start.dest_role = rec_role;
  start.payload = {0, static_cast<uint8_t>(fps > 0.0 ? 1 : 0)};
  rec.inbox().push_control(std::move(start));
  const double t_start = monotonic_seconds();
  int64_t delivered = 0;
  auto fail = [&](const std::string& why) { result.error = why; };

  for (int64_t i = 0; i < items && result.ok(); ++i) {
    if (fps > 0.0) {
      const double due = t_start + static_cast<double>(i) / fps;
      const double wait = due - monotonic_seconds();
      if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    Bundle b;
    b.sent_at = b.origin = monotonic_seconds();
    for (const auto& src : graph_.inputs()) {
      b.pieces.push_back(Piece{graph_.index_of(src), 0, 1, frames.at(src)[static_cast<size_t>(i)]});
    }
    Message m;
    m.kind = MessageKind::Data;
    m.stream_id = stream_;
    m.tag = static_cast<uint64_t>(i);
    m.source = kCameraId;
    m.dest_role = rec_role;
    m.payload = encode_bundle(b);
    const bool ok = fps > 0.0 ? rec.inbox().offer(std::move(m)) : rec.inbox().push(std::move(m));
    if (ok) {
      ++delivered;
    } else if (fps > 0.0 && !rec.failed()) {
      ++result.camera_drops;
    } else {
      fail(rec.failed() ? rec.error() : "recorder stopped accepting frames");
    }
  }
  Message end;
  end.kind = MessageKind::Heartbeat;
  end.stream_id = stream_;
  end.tag = static_cast<uint64_t>(delivered);
  end.source = kCameraId;
  end.dest_role = rec_role;
  end.payload = {1};
  rec.inbox().push_control(std::move(end));

  const double deadline = t_start + options_.timeout_seconds;
  while (result.ok() && !collector_->wait_for(0.05)) {
    for (const auto& [d, e] : table_.entries) {
      if (workers_.at(d)->failed()) {
        fail(workers_.at(d)->error());
        break;
      }
    }
    if (result.ok() && monotonic_seconds() > deadline) fail("run timed out");
  }
  const double t_end = monotonic_seconds();
  collector_->fill(result);
  const auto after = stats();
  RunMetrics& m = result.metrics;
  for (const auto& [d, e] : table_.entries) {
    m.per_device_busy_seconds.push_back(after.at(d).busy_seconds - before.at(d).busy_seconds);
  }
  m.wall_seconds = t_end - t_start;
  m.drops = result.camera_drops + result.sampling_drops;
  m.setup_seconds = setup_seconds_;
  return result;
}

ChairsReport Cluster::musical_chairs(const ChairsTrigger& trigger) {
  check_workers();
  const int master = table_.master();
  const IPTable expected = edgepart::musical_chairs(graph_, plans_, table_, trigger);
  if (trigger.kind == ChairsTrigger::Kind::DeviceLost) workers_.at(trigger.device)->stop();

  std::vector<uint8_t> payload;
  payload.push_back(trigger.kind == ChairsTrigger::Kind::MotionOn ? 0 : 1);
  const uint16_t device = static_cast<uint16_t>(trigger.device);
  payload.push_back(static_cast<uint8_t>(device & 0xFF));
  payload.push_back(static_cast<uint8_t>(device >> 8));
  send_command(master, Command::Chairs, payload);

  ChairsReport report;
  std::map<uint64_t, std::pair<double, bool>> acks;
  const double per_attempt = std::min(options_.timeout_seconds, 30.0);
  for (report.attempts = 1;; ++report.attempts) {
    for (const auto& a : await_acks(expected.version, expected.entries.size() - acks.size(), per_attempt)) {
      acks.insert(a);
    }
    if (acks.size() >= expected.entries.size()) break;
    if (report.attempts >= 3) throw RuntimeFault("role update not acknowledged by every device");
    send_command(master, Command::Rebroadcast, {});
  }
  table_ = expected;
  report.table = expected;
  for (const auto& [d, a] : acks) {
    if (!a.second) continue;
    report.reloaded.push_back(static_cast<int>(d));
    report.setup_seconds = std::max(report.setup_seconds, a.first);
  }
  setup_seconds_ = report.setup_seconds;
  return report;
}

bool Cluster::propose_update(int from_device, const IPTable& table) {
  Message m;
  m.kind = MessageKind::RoleUpdate;
  m.tag = table.version;
  m.source = static_cast<uint16_t>(from_device);
  m.payload = encode_table(table);
  for (const auto& [d, e] : table_.entries) net_->send(e.address, m);
  return !await_acks(table.version, table_.entries.size(), 0.5).empty();
}

double max_output_diff(const ModelGraph& graph, const std::map<std::string, std::vector<Tensor>>& frames,
                       const StreamResult& result) {
  std::map<std::string, std::vector<Tensor>> kept;
  for (const auto& src : graph.inputs()) {
    auto& seq = kept[src];
    for (int64_t raw : result.kept) seq.push_back(frames.at(src).at(static_cast<size_t>(raw)));
  }
  const auto ref = run_reference_stream(graph, kept);
  const double inf = std::numeric_limits<double>::infinity();
  if (ref.size() != result.outputs.size()) return inf;
  double worst = 0.0;
  for (const auto& [tag, outs] : ref) {
    auto it = result.outputs.find(tag);
    if (it == result.outputs.end()) return inf;
    for (const auto& [name, t] : outs) {
      auto o = it->second.find(name);
      if (o == it->second.end()) return inf;
      worst = std::max(worst, max_abs_diff(t, o->second));
    }
  }
  return worst;
}

}  // namespace edgepart
