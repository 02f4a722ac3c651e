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

#ifndef EDGEPART_RUNTIME_WIRE_HPP
#define EDGEPART_RUNTIME_WIRE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "edgepart/metrics.hpp"
#include "edgepart/tensor.hpp"

namespace edgepart {

enum class MessageKind : uint8_t { Data = 0, AlmostFull = 1, RoleUpdate = 2, Heartbeat = 3 };

constexpr uint8_t kWireVersion = 1;
constexpr size_t kHeaderBytes = 20;
// Reserved endpoints outside the role space.
constexpr uint16_t kCollectorRole = 0xFFFF;
constexpr uint16_t kCameraId = 0xFFFE;
constexpr uint16_t kControllerId = 0xFFFD;
// Device ids and role ids stay below this.
constexpr uint16_t kMaxDeviceId = 0xFF00;

struct Message {
  MessageKind kind = MessageKind::Data;
  uint16_t stream_id = 0;
  uint64_t tag = 0;
  uint16_t source = 0;
  uint16_t dest_role = 0;
  std::vector<uint8_t> payload;

  bool is_control() const { return kind != MessageKind::Data; }
};

// Length-prefixed frame: fixed little-endian header followed by the payload.
std::vector<uint8_t> encode_frame(const Message& m);
Message decode_frame(std::span<const uint8_t> bytes);
// Header only; returns the payload length the frame announces.
uint32_t decode_header(std::span<const uint8_t> header, Message& out);

void put_tensor(std::vector<uint8_t>& out, const Tensor& t);
Tensor get_tensor(std::span<const uint8_t> bytes, size_t& pos);

// A (layer, part) output travelling between tasks.
struct Piece {
  int layer = 0;
  int64_t part = 0;
  int64_t count = 1;
  Tensor value;
};

// Data payload: every piece one task replica sends another for one tag, with
// the critical-path costs accumulated so far.
struct Bundle {
  double sent_at = 0.0;
  double origin = 0.0;  // when the recorder tagged the item
  LatencyBreakdown path;
  std::vector<Piece> pieces;
};

std::vector<uint8_t> encode_bundle(const Bundle& b);
Bundle decode_bundle(std::span<const uint8_t> bytes);

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_WIRE_HPP
