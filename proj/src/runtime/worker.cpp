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

#include "edgepart/runtime/worker.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <set>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

constexpr uint16_t kSelfRole = 0xFFFB;

double total(const LatencyBreakdown& b) { return b.compute + b.comm + b.reload; }

int64_t out_extent(const ModelGraph& graph, int layer) {
  const TensorShape& s = graph.shape(layer);
  return s[s.rank() - 1];
}

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
  const size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T get(std::span<const uint8_t> bytes, size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error("truncated control payload");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

double monotonic_seconds() {
  static const auto epoch = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch).count();
}

TaskProgram TaskProgram::build(const ModelGraph& graph, const Assignment& a, int task, int replica) {
  const Task& t = a.tasks.at(static_cast<size_t>(task));
  TaskProgram p;
  p.task = task;
  p.replica = replica;
  p.replicas = t.replicas;
  p.layers = t.layers;
  p.reloading = t.reloading();
  p.segments = t.reloading() ? t.segments : std::vector<std::vector<LayerSlice>>{t.layers};
  for (const auto& s : t.layers) {
    if (graph.layer(s.layer).is<Source>()) p.recorder = true;
    p.part_count[s.layer] = s.count;
    p.keep[{s.layer, s.part}] = 1;
  }
  std::set<int> preds;
  for (const auto& e : a.edges) {
    if (e.to_task == task) {
      p.inbound.push_back(e);
      p.part_count[e.layer] = e.count;
      p.keep[{e.layer, e.part}] = 1;
      preds.insert(e.from_task);
    }
    if (e.from_task == task) p.outbound[e.to_task].push_back(e);
  }
  p.predecessors.assign(preds.begin(), preds.end());
  for (const auto& name : graph.outputs()) p.output_from = std::max(p.output_from, graph.first_tag(graph.index_of(name)));
  for (const auto& s : t.layers) {
    const std::string& name = graph.layer(s.layer).name;
    if (std::find(graph.outputs().begin(), graph.outputs().end(), name) != graph.outputs().end()) p.outputs.push_back(s);
    const int64_t w = input_window(graph.layer(s.layer));
    for (int q : graph.input_indices(s.layer)) {
      for (auto& [key, depth] : p.keep) {
        if (key.first == q) depth = std::max(depth, w);
      }
    }
  }
  if (p.recorder) {
    if (p.replicas != 1) throw PlanError("the recorder task cannot be replicated");
    return p;
  }
  if (p.inbound.empty()) throw PlanError("task " + std::to_string(task) + " has no inputs");
  int64_t s0 = INT64_MAX;
  for (const auto& e : p.inbound) s0 = std::min(s0, graph.first_tag(e.layer));
  const int64_t k = p.replicas;
  p.start_tag = s0 + (((replica - s0) % k) + k) % k;
  return p;
}

int64_t TaskProgram::expected_pieces(const ModelGraph& graph, int64_t tag) const {
  int64_t n = 0;
  for (const auto& e : inbound) n += graph.first_tag(e.layer) <= tag ? 1 : 0;
  return n;
}

Worker::Worker(WorkerConfig config) : config_(std::move(config)), inbox_(config_.inbox_capacity) {
  if (!config_.graph || !config_.plans || !config_.net) throw Error("worker needs a graph, plans and a transport");
  inbox_.on_almost_full([this] {
    Message m;
    m.kind = MessageKind::AlmostFull;
    m.source = static_cast<uint16_t>(config_.device);
    m.dest_role = kSelfRole;
    inbox_.push_control(std::move(m));
  });
}

Worker::~Worker() { stop(); }

void Worker::start() {
  if (running_) return;
  running_ = true;
  thread_ = std::thread([this] { loop(); });
}

void Worker::stop() {
  inbox_.close();
  if (thread_.joinable()) thread_.join();
  running_ = false;
}

std::string Worker::error() const {
  std::lock_guard lock(stats_mu_);
  return error_;
}

WorkerStats Worker::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void Worker::loop() {
  while (auto m = inbox_.pop()) {
    try {
      handle(std::move(*m));
    } catch (const std::exception& e) {
      {
        std::lock_guard lock(stats_mu_);
        error_ = "device " + std::to_string(config_.device) + ": " + e.what();
      }
      failed_ = true;
      inbox_.close();
      return;
    }
  }
}

void Worker::handle(Message m) {
  switch (m.kind) {
    case MessageKind::Data:
      on_data(m);
      return;
    case MessageKind::AlmostFull:
      on_almost_full(m);
      return;
    case MessageKind::RoleUpdate:
      on_table(m);
      return;
    case MessageKind::Heartbeat:
      if (m.source == kCameraId) {
        end_of_clip(m);
      } else if (m.source == kControllerId) {
        on_command(m);
      }
      return;
  }
}

void Worker::on_table(const Message& m) {
  const IPTable update = decode_table(m.payload);
  if (accept_update(table_, update, m.source)) {
    with_stats([&](WorkerStats& s) { s.table_version = table_.version; });
    const auto [reloaded, seconds] = reconfigure();
    ack(table_.version, seconds, reloaded);
  } else if (update.version == table_.version && update == table_) {
    ack(table_.version, 0.0, false);
  } else {
    with_stats([](WorkerStats& s) { ++s.rejected_updates; });
  }
}

void Worker::broadcast(const IPTable& t) {
  last_broadcast_ = t;
  Message m;
  m.kind = MessageKind::RoleUpdate;
  m.tag = t.version;
  m.source = static_cast<uint16_t>(config_.device);
  m.payload = encode_table(t);
  for (const auto& [d, e] : t.entries) {
    m.dest_role = e.role < 0 ? kCollectorRole : static_cast<uint16_t>(e.role);
    config_.net->send(e.address, m);
  }
}

void Worker::on_command(const Message& m) {
  switch (static_cast<Command>(m.tag)) {
    case Command::BroadcastTable: {
      const IPTable t = decode_table(m.payload);
      if (t.master() != config_.device) throw RuntimeFault("initial table sent to a non-master");
      with_stats([](WorkerStats& s) { ++s.master_writes; });
      broadcast(t);
      return;
    }
    case Command::Chairs: {
      if (table_.entries.empty() || table_.master() != config_.device) {
        throw RuntimeFault("musical chairs requested from a non-master device");
      }
      size_t pos = 0;
      ChairsTrigger trigger;
      trigger.kind = get<uint8_t>(m.payload, pos) == 0 ? ChairsTrigger::Kind::MotionOn : ChairsTrigger::Kind::DeviceLost;
      trigger.device = get<uint16_t>(m.payload, pos);
      const IPTable next = musical_chairs(*config_.graph, *config_.plans, table_, trigger);
      with_stats([](WorkerStats& s) { ++s.master_writes; });
      broadcast(next);
      return;
    }
    case Command::Rebroadcast:
      if (last_broadcast_.version > 0) broadcast(last_broadcast_);
      return;
  }
  throw RuntimeFault("unknown controller command " + std::to_string(m.tag));
}

void Worker::ack(uint64_t version, double reload_seconds, bool reloaded) {
  Message m;
  m.kind = MessageKind::Heartbeat;
  m.tag = version;
  m.source = static_cast<uint16_t>(config_.device);
  m.dest_role = kCollectorRole;
  put<double>(m.payload, reload_seconds);
  put<uint8_t>(m.payload, reloaded ? 1 : 0);
  config_.net->send(config_.controller_address, m);
}

std::pair<bool, double> Worker::reconfigure() {
  plan_ = &config_.plans->at(table_.plan_n);
  const int role = table_.role_of(config_.device);
  const bool initial = !configured_;
  configured_ = true;
  if (role < 0) {
    program_ = TaskProgram{};
    params_.clear();
    work_ = Task{};
    work_.id = -1;
    reset_stream(stream_);
    return {false, 0.0};
  }
  const Role r = roles_of(*plan_).at(static_cast<size_t>(role));
  const Task& next = plan_->tasks.at(static_cast<size_t>(r.task));
  const bool keep = program_.task >= 0 && same_work(work_, next);
  program_ = TaskProgram::build(*config_.graph, *plan_, r.task, r.replica);
  reset_stream(stream_);
  if (keep) return {false, 0.0};

  work_ = next;
  params_.clear();
  resident_segment_ = 0;
  const double seconds = load_params(program_.segments.front());
  with_stats([&](WorkerStats& s) {
    s.setup_seconds = seconds;
    if (!initial) ++s.role_reloads;
  });
  return {!initial, seconds};
}

double Worker::load_params(const std::vector<LayerSlice>& slices) {
  const double t0 = monotonic_seconds();
  if (program_.reloading) params_.clear();
  int corrupt_layer = -1;
  if (config_.corrupt) {
    for (const auto& s : program_.layers) {
      if (has_weights(config_.graph->layer(s.layer))) {
        corrupt_layer = s.layer;
        break;
      }
    }
  }
  for (const auto& s : slices) {
    if (!has_weights(config_.graph->layer(s.layer))) continue;
    LayerParams p = generate_params(*config_.graph, s.layer);
    if (s.count > 1) {
      const auto [b, e] = part_rows(out_extent(*config_.graph, s.layer), s.part, s.count);
      p = slice_params(p, b, e);
    }
    if (s.layer == corrupt_layer) {
      Tensor& target = p.weights.size() > 0 ? p.weights : p.gamma;
      target.mutable_data()[0] += 1e-3f;
    }
    params_[s.layer] = std::move(p);
  }
  return monotonic_seconds() - t0;
}

void Worker::reset_stream(uint16_t stream_id) {
  stream_ = stream_id;
  history_.clear();
  assembling_.clear();
  const int64_t k = std::max(program_.replicas, 1);
  order_ = SlidingWindow<Pending>(1, k, program_.start_tag, 2 * k);
  next_record_tag_ = 0;
  kept_raw_.clear();
  phase_ = 0;
  divisor_ = 1;
  cooldown_until_ = 0.0;
  raw_seen_ = 0;
  clip_end_ = -1;
  with_stats([](WorkerStats& s) { s.sampling_divisor = 1; });
}

void Worker::on_data(const Message& m) {
  if (m.stream_id != stream_) reset_stream(m.stream_id);
  if (m.source == kCameraId) {
    if (!program_.recorder) {
      with_stats([](WorkerStats& s) { ++s.misrouted; });
      return;
    }
    on_raw_frame(m, decode_bundle(m.payload));
    return;
  }
  if (program_.task < 0 || m.dest_role != table_.role_of(config_.device)) {
    with_stats([](WorkerStats& s) { ++s.misrouted; });
    return;
  }
  const int64_t tag = static_cast<int64_t>(m.tag);
  if (tag < order_.next_tag()) {
    with_stats([](WorkerStats& s) { ++s.late; });
    return;
  }
  Bundle b = decode_bundle(m.payload);
  LatencyBreakdown path = b.path;
  path.comm += std::max(0.0, monotonic_seconds() - b.sent_at);

  Pending& p = assembling_[tag];
  for (auto& piece : b.pieces) {
    if (!p.pieces.emplace(std::make_pair(piece.layer, piece.part), std::move(piece.value)).second) {
      throw RuntimeFault("duplicate piece for tag " + std::to_string(tag));
    }
  }
  if (!p.have_path || total(path) > total(p.path)) p.path = path;
  p.origin = p.have_path ? std::min(p.origin, b.origin) : b.origin;
  p.have_path = true;
  if (static_cast<int64_t>(p.pieces.size()) < program_.expected_pieces(*config_.graph, tag)) return;

  Pending ready = std::move(p);
  assembling_.erase(tag);
  auto windows = order_.push(tag, std::move(ready));
  with_stats([&](WorkerStats& s) { s.window_overflows = order_.overflows(); });
  for (auto& w : windows) execute(w.tag, std::move(w.items.front()));
}

void Worker::on_raw_frame(const Message& m, const Bundle& b) {
  const double now = monotonic_seconds();
  if (divisor_ > 1 && now >= cooldown_until_) {
    divisor_ = 1;
    phase_ = 0;
    with_stats([](WorkerStats& s) { s.sampling_divisor = 1; });
  }
  ++raw_seen_;
  const bool keep = phase_ % divisor_ == 0;
  ++phase_;
  if (!keep) {
    with_stats([](WorkerStats& s) { ++s.sampling_drops; });
  } else {
    const int64_t tag = next_record_tag_++;
    kept_raw_.push_back(static_cast<int64_t>(m.tag));
    Pending p;
    for (const auto& piece : b.pieces) p.pieces[{piece.layer, 0}] = piece.value;
    p.origin = now;
    execute(tag, std::move(p));
  }
  maybe_finish_clip();
}

void Worker::end_of_clip(const Message& m) {
  if (m.stream_id != stream_) reset_stream(m.stream_id);
  if (m.payload.empty()) throw RuntimeFault("camera marker without a body");
  if (m.payload[0] == 0) {
    adaptive_ = m.payload.size() > 1 && m.payload[1] != 0;
    return;
  }
  clip_end_ = static_cast<int64_t>(m.tag);
  maybe_finish_clip();
}

void Worker::maybe_finish_clip() {
  if (clip_end_ < 0 || raw_seen_ < clip_end_) return;
  Message m;
  m.kind = MessageKind::Heartbeat;
  m.stream_id = stream_;
  m.tag = static_cast<uint64_t>(next_record_tag_);
  m.source = static_cast<uint16_t>(config_.device);
  m.dest_role = kCollectorRole;
  put<uint64_t>(m.payload, static_cast<uint64_t>(stats().sampling_drops));
  for (int64_t raw : kept_raw_) put<uint64_t>(m.payload, static_cast<uint64_t>(raw));
  config_.net->send(config_.collector_address, m);
  clip_end_ = -1;
}

void Worker::on_almost_full(const Message& m) {
  if (m.source == config_.device && m.dest_role == kSelfRole) {
    if (program_.task < 0) return;
    int sent = 0;
    Message signal;
    signal.kind = MessageKind::AlmostFull;
    signal.stream_id = stream_;
    signal.source = static_cast<uint16_t>(config_.device);
    for (int task : program_.predecessors) {
      for (int r = 0; r < plan_->tasks.at(static_cast<size_t>(task)).replicas; ++r) {
        send_to_role(task, r, signal);
        ++sent;
      }
    }
    with_stats([&](WorkerStats& s) { s.almost_full_sent += sent; });
    return;
  }
  with_stats([](WorkerStats& s) { ++s.almost_full_received; });
  if (!program_.recorder || !adaptive_) return;
  divisor_ = std::min(divisor_ * 2, config_.max_sampling_divisor);
  phase_ = 0;
  cooldown_until_ = monotonic_seconds() + config_.cooldown_seconds;
  with_stats([&](WorkerStats& s) { s.sampling_divisor = divisor_; });
}

void Worker::send_to_role(int task, int replica, Message m) {
  const int role = role_id(*plan_, task, replica);
  m.dest_role = static_cast<uint16_t>(role);
  const int device = table_.device_of(role);
  if (device < 0 || !config_.net->send(table_.entries.at(device).address, m)) {
    with_stats([](WorkerStats& s) { ++s.unroutable; });
  }
}

const Tensor& Worker::piece(int layer, int64_t part, int64_t tag) const {
  auto it = history_.find({layer, part});
  if (it == history_.end() || !it->second.count(tag)) {
    throw RuntimeFault("missing '" + config_.graph->layer(layer).name + "' part " + std::to_string(part) + " at tag " +
                       std::to_string(tag));
  }
  return it->second.at(tag);
}

Tensor Worker::full_value(int layer, int64_t tag) const {
  auto it = program_.part_count.find(layer);
  const int64_t count = it == program_.part_count.end() ? 1 : it->second;
  if (count == 1) return piece(layer, 0, tag);
  std::vector<Tensor> parts;
  for (int64_t p = 0; p < count; ++p) parts.push_back(piece(layer, p, tag));
  return forward_concat(parts, static_cast<int64_t>(parts.front().shape().rank()) - 1);
}

void Worker::compute_slice(const LayerSlice& s, int64_t tag) {
  const ModelGraph& g = *config_.graph;
  const LayerSpec& layer = g.layer(s.layer);
  if (layer.is<Source>()) {
    piece(s.layer, 0, tag);
    return;
  }
  std::vector<Tensor> inputs;
  const auto producers = g.input_indices(s.layer);
  if (is_windowed(layer)) {
    const int64_t w = input_window(layer);
    for (int64_t u = tag - w + 1; u <= tag; ++u) inputs.push_back(full_value(producers.front(), u));
  } else if (s.count > 1 && is_partable_glue(layer)) {
    inputs.push_back(piece(producers.front(), s.part, tag));
  } else {
    for (int q : producers) inputs.push_back(full_value(q, tag));
  }
  static const LayerParams kNone;
  auto it = params_.find(s.layer);
  if (has_weights(layer) && it == params_.end()) {
    throw RuntimeFault("weights for '" + layer.name + "' are not resident");
  }
  history_[{s.layer, s.part}][tag] = forward_layer(layer, it == params_.end() ? kNone : it->second, inputs);
}

void Worker::execute(int64_t tag, Pending p) {
  const ModelGraph& g = *config_.graph;
  for (auto& [key, value] : p.pieces) history_[key][tag] = std::move(value);

  double compute = 0.0, reload = 0.0;
  int64_t reloads = 0;
  for (size_t si = 0; si < program_.segments.size(); ++si) {
    std::vector<LayerSlice> active;
    for (const auto& s : program_.segments[si]) {
      if (g.first_tag(s.layer) <= tag) active.push_back(s);
    }
    if (active.empty()) continue;
    if (program_.reloading && resident_segment_ != static_cast<int>(si)) {
      reload += load_params(program_.segments[si]);
      resident_segment_ = static_cast<int>(si);
      ++reloads;
    }
    const double c0 = monotonic_seconds();
    for (const auto& s : active) compute_slice(s, tag);
    compute += monotonic_seconds() - c0;
  }
  if (config_.compute_delay > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(config_.compute_delay));
    compute += config_.compute_delay;
  }

  LatencyBreakdown path = p.path;
  path.compute += compute;
  path.reload += reload;
  const auto base_message = [&](uint16_t dest) {
    Message m;
    m.kind = MessageKind::Data;
    m.stream_id = stream_;
    m.tag = static_cast<uint64_t>(tag);
    m.source = static_cast<uint16_t>(config_.device);
    m.dest_role = dest;
    return m;
  };
  const auto make_bundle = [&] {
    Bundle b;
    b.origin = p.origin;
    b.path = path;
    return b;
  };

  for (const auto& [to, edges] : program_.outbound) {
    Bundle b = make_bundle();
    for (const auto& e : edges) {
      if (g.first_tag(e.layer) <= tag) b.pieces.push_back(Piece{e.layer, e.part, e.count, piece(e.layer, e.part, tag)});
    }
    if (b.pieces.empty()) continue;
    b.sent_at = monotonic_seconds();
    Message m = base_message(0);
    m.payload = encode_bundle(b);
    send_to_role(to, static_cast<int>(tag % plan_->tasks.at(static_cast<size_t>(to)).replicas), std::move(m));
  }

  const auto to_collector = [&](const std::vector<LayerSlice>& slices, uint16_t role) {
    Bundle b = make_bundle();
    for (const auto& s : slices) {
      if (g.first_tag(s.layer) <= tag) b.pieces.push_back(Piece{s.layer, s.part, s.count, piece(s.layer, s.part, tag)});
    }
    if (b.pieces.empty()) return;
    b.sent_at = monotonic_seconds();
    Message m = base_message(role);
    m.payload = encode_bundle(b);
    if (!config_.net->send(config_.collector_address, m)) {
      with_stats([](WorkerStats& s) { ++s.unroutable; });
    }
  };
  if (tag >= program_.output_from && !program_.outputs.empty()) to_collector(program_.outputs, kCollectorRole);
  if (config_.trace) to_collector(program_.layers, kTraceRole);

  for (auto& [key, hist] : history_) {
    auto k = program_.keep.find(key);
    const int64_t depth = k == program_.keep.end() ? 1 : k->second;
    while (!hist.empty() && hist.begin()->first <= tag - depth) hist.erase(hist.begin());
  }
  with_stats([&](WorkerStats& s) {
    s.busy_seconds += compute + reload;
    s.reload_seconds += reload;
    s.reloads += reloads;
    ++s.tags;
  });
}

}  // namespace edgepart
