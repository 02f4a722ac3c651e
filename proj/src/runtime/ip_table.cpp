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

#include "edgepart/runtime/ip_table.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "edgepart/error.hpp"
#include "edgepart/runtime/wire.hpp"

namespace edgepart {

namespace {

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
  const size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T get(std::span<const uint8_t> bytes, size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error("truncated ip table");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

const Task* work_of(const AssignmentSet& set, const IPTable& t, int device) {
  const int role = t.role_of(device);
  if (role < 0) return nullptr;
  const Assignment& a = set.at(t.plan_n);
  const auto roles = roles_of(a);
  return &a.tasks.at(static_cast<size_t>(roles.at(static_cast<size_t>(role)).task));
}

int recorder_role(const ModelGraph& graph, const Assignment& a) {
  const int task = a.recorder_task(graph);
  return task < 0 ? -1 : role_id(a, task, 0);
}

}  // namespace

std::vector<Role> roles_of(const Assignment& a) {
  std::vector<Role> out;
  for (const auto& t : a.tasks) {
    for (int r = 0; r < t.replicas; ++r) out.push_back(Role{t.id, r});
  }
  return out;
}

int role_id(const Assignment& a, int task, int replica) {
  int id = 0;
  for (const auto& t : a.tasks) {
    if (t.id == task) {
      if (replica < 0 || replica >= t.replicas) throw Error("replica out of range");
      return id + replica;
    }
    id += t.replicas;
  }
  throw Error("no task " + std::to_string(task));
}

int IPTable::master() const {
  int found = -1;
  for (const auto& [d, e] : entries) {
    if (!e.master) continue;
    if (found >= 0) throw RuntimeFault("ip table has two masters");
    found = d;
  }
  if (found < 0) throw RuntimeFault("ip table has no master");
  return found;
}

int IPTable::recorder() const {
  for (const auto& [d, e] : entries) {
    if (e.recorder) return d;
  }
  return -1;
}

int IPTable::device_of(int role) const {
  if (role < 0) return -1;
  for (const auto& [d, e] : entries) {
    if (e.role == role) return d;
  }
  return -1;
}

int IPTable::role_of(int device) const {
  auto it = entries.find(device);
  return it == entries.end() ? -1 : it->second.role;
}

void IPTable::check() const {
  master();
  int recorders = 0;
  std::set<int> held;
  for (const auto& [d, e] : entries) {
    recorders += e.recorder ? 1 : 0;
    if (e.role >= 0 && !held.insert(e.role).second) {
      throw RuntimeFault("role " + std::to_string(e.role) + " held by two devices");
    }
  }
  if (recorders > 1) throw RuntimeFault("ip table has several recorders");
}

std::vector<uint8_t> encode_table(const IPTable& t) {
  std::vector<uint8_t> out;
  put<uint64_t>(out, t.version);
  put<uint16_t>(out, static_cast<uint16_t>(t.plan_n));
  put<uint16_t>(out, static_cast<uint16_t>(t.entries.size()));
  for (const auto& [d, e] : t.entries) {
    put<uint16_t>(out, static_cast<uint16_t>(d));
    put<int32_t>(out, e.role);
    put<uint8_t>(out, static_cast<uint8_t>((e.master ? 1 : 0) | (e.recorder ? 2 : 0)));
    put<uint16_t>(out, static_cast<uint16_t>(e.address.size()));
    out.insert(out.end(), e.address.begin(), e.address.end());
  }
  return out;
}

IPTable decode_table(std::span<const uint8_t> bytes) {
  IPTable t;
  size_t pos = 0;
  t.version = get<uint64_t>(bytes, pos);
  t.plan_n = get<uint16_t>(bytes, pos);
  const auto n = get<uint16_t>(bytes, pos);
  for (uint16_t i = 0; i < n; ++i) {
    const int d = get<uint16_t>(bytes, pos);
    IPEntry e;
    e.role = get<int32_t>(bytes, pos);
    const auto flags = get<uint8_t>(bytes, pos);
    e.master = flags & 1;
    e.recorder = flags & 2;
    const auto len = get<uint16_t>(bytes, pos);
    if (pos + len > bytes.size()) throw Error("truncated ip table");
    e.address.assign(bytes.begin() + static_cast<ptrdiff_t>(pos), bytes.begin() + static_cast<ptrdiff_t>(pos + len));
    pos += len;
    t.entries[d] = std::move(e);
  }
  if (pos != bytes.size()) throw Error("trailing bytes after ip table");
  return t;
}

IPTable initial_table(const ModelGraph& graph, const AssignmentSet& set, const std::vector<int>& device_ids,
                      const std::vector<std::string>& addresses) {
  if (device_ids.empty()) throw Error("no devices");
  if (addresses.size() != device_ids.size()) throw Error("one address per device required");
  if (std::set<int>(device_ids.begin(), device_ids.end()).size() != device_ids.size()) {
    throw Error("duplicate device id");
  }
  for (int d : device_ids) {
    if (d < 0 || d >= kMaxDeviceId) throw Error("device id " + std::to_string(d) + " out of range");
  }
  const int n = static_cast<int>(device_ids.size());
  const Assignment& a = set.at(n);
  IPTable t;
  t.version = 1;
  t.plan_n = n;
  const int rec = recorder_role(graph, a);
  for (int i = 0; i < n; ++i) {
    const DeviceSlot& slot = a.devices[static_cast<size_t>(i)];
    IPEntry e;
    e.address = addresses[static_cast<size_t>(i)];
    e.role = slot.task < 0 ? -1 : role_id(a, slot.task, slot.replica);
    e.recorder = e.role >= 0 && e.role == rec;
    t.entries[device_ids[static_cast<size_t>(i)]] = e;
  }
  t.entries.begin()->second.master = true;
  t.check();
  return t;
}

bool accept_update(IPTable& local, const IPTable& update, int from_device) {
  const int master = local.entries.empty() ? update.master() : local.master();
  if (from_device != master) return false;
  if (update.version <= local.version) return false;
  update.check();
  local = update;
  return true;
}

bool same_work(const Task& a, const Task& b) { return a.layers == b.layers && a.segments == b.segments; }

IPTable musical_chairs(const ModelGraph& graph, const AssignmentSet& set, const IPTable& current,
                       const ChairsTrigger& trigger) {
  current.check();
  if (!current.entries.count(trigger.device)) {
    throw RuntimeFault("device " + std::to_string(trigger.device) + " is not in the ip table");
  }
  IPTable next = current;
  ++next.version;

  if (trigger.kind == ChairsTrigger::Kind::MotionOn) {
    const int rec = recorder_role(graph, set.at(current.plan_n));
    const int old = current.device_of(rec);
    if (old >= 0 && old != trigger.device) {
      std::swap(next.entries.at(old).role, next.entries.at(trigger.device).role);
    } else if (old < 0) {
      next.entries.at(trigger.device).role = rec;
    }
    for (auto& [d, e] : next.entries) e.recorder = d == trigger.device;
    next.check();
    return next;
  }

  if (trigger.device == current.master()) throw RuntimeFault("master device lost; re-election is not supported");
  next.entries.erase(trigger.device);
  next.plan_n = static_cast<int>(next.entries.size());
  const Assignment& plan = set.at(next.plan_n);
  const auto roles = roles_of(plan);
  std::vector<bool> taken(roles.size(), false);
  std::map<int, int> chosen;
  // Keep devices whose current work appears in the new plan.
  for (const auto& [d, e] : next.entries) {
    const Task* old = work_of(set, current, d);
    if (!old) continue;
    const int old_replica = roles_of(set.at(current.plan_n)).at(static_cast<size_t>(e.role)).replica;
    int pick = -1;
    for (size_t r = 0; r < roles.size(); ++r) {
      if (taken[r] || !same_work(plan.tasks[static_cast<size_t>(roles[r].task)], *old)) continue;
      if (pick < 0 || roles[r].replica == old_replica) pick = static_cast<int>(r);
      if (roles[r].replica == old_replica) break;
    }
    if (pick >= 0) {
      taken[static_cast<size_t>(pick)] = true;
      chosen[d] = pick;
    }
  }
  size_t r = 0;
  for (auto& [d, e] : next.entries) {
    if (chosen.count(d)) {
      e.role = chosen[d];
      continue;
    }
    while (r < roles.size() && taken[r]) ++r;
    if (r < roles.size()) {
      e.role = static_cast<int>(r);
      taken[r] = true;
    } else {
      e.role = -1;
    }
  }
  const int rec = recorder_role(graph, plan);
  for (auto& [d, e] : next.entries) e.recorder = e.role >= 0 && e.role == rec;
  next.check();
  return next;
}

std::vector<int> changed_devices(const AssignmentSet& set, const IPTable& before, const IPTable& after) {
  std::vector<int> out;
  for (const auto& [d, e] : after.entries) {
    const Task* now = work_of(set, after, d);
    if (!now) continue;
    const Task* was = before.entries.count(d) ? work_of(set, before, d) : nullptr;
    if (!was || !same_work(*was, *now)) out.push_back(d);
  }
  return out;
}

StreamPartition activate_streams(const std::vector<int>& stream_ids, const std::vector<int>& devices, int min_devices) {
  if (min_devices < 1) throw Error("min_devices must be >= 1");
  StreamPartition p;
  const size_t active = std::min(stream_ids.size(), devices.size() / static_cast<size_t>(min_devices));
  size_t next = 0;
  for (size_t s = 0; s < stream_ids.size(); ++s) {
    if (s >= active) {
      p.deferred.push_back(stream_ids[s]);
      continue;
    }
    const size_t take = devices.size() / active + (s < devices.size() % active ? 1 : 0);
    StreamGroup g;
    g.stream_id = stream_ids[s];
    g.devices.assign(devices.begin() + static_cast<ptrdiff_t>(next), devices.begin() + static_cast<ptrdiff_t>(next + take));
    next += take;
    p.active.push_back(std::move(g));
  }
  return p;
}

}  // namespace edgepart
