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

#ifndef EDGEPART_RUNTIME_IP_TABLE_HPP
#define EDGEPART_RUNTIME_IP_TABLE_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "edgepart/model_ir.hpp"
#include "edgepart/partitioner.hpp"

namespace edgepart {

// A role is one replica of one task; role ids enumerate tasks in order and
// replicas within each task.
struct Role {
  int task = 0;
  int replica = 0;
};

std::vector<Role> roles_of(const Assignment& a);
int role_id(const Assignment& a, int task, int replica);

struct IPEntry {
  std::string address;
  int role = -1;  // -1: idle
  bool master = false;
  bool recorder = false;
  friend bool operator==(const IPEntry&, const IPEntry&) = default;
};

struct IPTable {
  uint64_t version = 0;
  int plan_n = 0;  // device count of the active AssignmentSet entry
  std::map<int, IPEntry> entries;

  int master() const;
  int recorder() const;  // -1 when no device records
  int device_of(int role) const;
  int role_of(int device) const;
  // Exactly one master, at most one recorder, no role held twice.
  void check() const;
  friend bool operator==(const IPTable&, const IPTable&) = default;
};

std::vector<uint8_t> encode_table(const IPTable& t);
IPTable decode_table(std::span<const uint8_t> bytes);

// Version 1 table: device_ids[i] takes the i-th device slot of the plan for
// n = device_ids.size(). The lowest id is master.
IPTable initial_table(const ModelGraph& graph, const AssignmentSet& set, const std::vector<int>& device_ids,
                      const std::vector<std::string>& addresses);

// Applies an update only when it comes from the current master and carries a
// higher version. An empty table takes its first update from that update's
// own master.
bool accept_update(IPTable& local, const IPTable& update, int from_device);

struct ChairsTrigger {
  enum class Kind { MotionOn, DeviceLost };
  Kind kind = Kind::MotionOn;
  int device = 0;
};

bool same_work(const Task& a, const Task& b);

// New role mapping after a trigger, keeping as many devices on their current
// work as possible. MotionOn moves the recorder role to `device`, swapping
// with its old holder. DeviceLost replans for one device fewer.
IPTable musical_chairs(const ModelGraph& graph, const AssignmentSet& set, const IPTable& current,
                       const ChairsTrigger& trigger);

// Devices whose work differs between two tables and so must reload.
std::vector<int> changed_devices(const AssignmentSet& set, const IPTable& before, const IPTable& after);

// Disjoint device sets for concurrent input streams, in priority order. Each
// active stream gets at least `min_devices`; the rest are deferred.
struct StreamGroup {
  int stream_id = 0;
  std::vector<int> devices;
};
struct StreamPartition {
  std::vector<StreamGroup> active;
  std::vector<int> deferred;
};
StreamPartition activate_streams(const std::vector<int>& stream_ids, const std::vector<int>& devices,
                                 int min_devices = 2);

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_IP_TABLE_HPP
