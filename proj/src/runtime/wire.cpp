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

#include "edgepart/runtime/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "edgepart/error.hpp"

namespace edgepart {

namespace {

static_assert(std::endian::native == std::endian::little, "wire codec assumes a little-endian host");

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
  const size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T get(std::span<const uint8_t> bytes, size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error("truncated message");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> encode_frame(const Message& m) {
  if (m.payload.size() > UINT32_MAX) throw Error("payload too large");
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + m.payload.size());
  put<uint8_t>(out, kWireVersion);
  put<uint8_t>(out, static_cast<uint8_t>(m.kind));
  put<uint16_t>(out, m.stream_id);
  put<uint64_t>(out, m.tag);
  put<uint16_t>(out, m.source);
  put<uint16_t>(out, m.dest_role);
  put<uint32_t>(out, static_cast<uint32_t>(m.payload.size()));
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

uint32_t decode_header(std::span<const uint8_t> header, Message& out) {
  size_t pos = 0;
  const auto version = get<uint8_t>(header, pos);
  if (version != kWireVersion) throw Error("unsupported wire version " + std::to_string(version));
  const auto kind = get<uint8_t>(header, pos);
  if (kind > static_cast<uint8_t>(MessageKind::Heartbeat)) throw Error("unknown message kind " + std::to_string(kind));
  out.kind = static_cast<MessageKind>(kind);
  out.stream_id = get<uint16_t>(header, pos);
  out.tag = get<uint64_t>(header, pos);
  out.source = get<uint16_t>(header, pos);
  out.dest_role = get<uint16_t>(header, pos);
  return get<uint32_t>(header, pos);
}

Message decode_frame(std::span<const uint8_t> bytes) {
  Message m;
  const uint32_t len = decode_header(bytes, m);
  if (bytes.size() != kHeaderBytes + len) {
    throw Error("frame length " + std::to_string(bytes.size()) + " does not match header (" +
                std::to_string(kHeaderBytes + len) + ")");
  }
  m.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
  return m;
}

void put_tensor(std::vector<uint8_t>& out, const Tensor& t) {
  const auto& dims = t.shape().dims();
  if (dims.size() > UINT8_MAX) throw Error("tensor rank too large");
  put<uint8_t>(out, static_cast<uint8_t>(dims.size()));
  for (int64_t d : dims) {
    if (d < 0 || d > static_cast<int64_t>(UINT32_MAX)) throw Error("tensor extent out of range");
    put<uint32_t>(out, static_cast<uint32_t>(d));
  }
  const size_t at = out.size();
  out.resize(at + t.data().size_bytes());
  std::memcpy(out.data() + at, t.data().data(), t.data().size_bytes());
}

Tensor get_tensor(std::span<const uint8_t> bytes, size_t& pos) {
  const auto rank = get<uint8_t>(bytes, pos);
  std::vector<int64_t> dims;
  for (uint8_t i = 0; i < rank; ++i) dims.push_back(get<uint32_t>(bytes, pos));
  TensorShape shape(std::move(dims));
  const size_t n = static_cast<size_t>(shape.elements());
  if (pos + n * sizeof(float) > bytes.size()) throw Error("truncated tensor");
  std::vector<float> data(n);
  std::memcpy(data.data(), bytes.data() + pos, n * sizeof(float));
  pos += n * sizeof(float);
  return Tensor(std::move(shape), std::move(data));
}

std::vector<uint8_t> encode_bundle(const Bundle& b) {
  std::vector<uint8_t> out;
  put<double>(out, b.sent_at);
  put<double>(out, b.origin);
  put<double>(out, b.path.compute);
  put<double>(out, b.path.comm);
  put<double>(out, b.path.reload);
  if (b.pieces.size() > UINT16_MAX) throw Error("too many pieces");
  put<uint16_t>(out, static_cast<uint16_t>(b.pieces.size()));
  for (const auto& p : b.pieces) {
    put<uint16_t>(out, static_cast<uint16_t>(p.layer));
    put<uint16_t>(out, static_cast<uint16_t>(p.part));
    put<uint16_t>(out, static_cast<uint16_t>(p.count));
    put_tensor(out, p.value);
  }
  return out;
}

Bundle decode_bundle(std::span<const uint8_t> bytes) {
  Bundle b;
  size_t pos = 0;
  b.sent_at = get<double>(bytes, pos);
  b.origin = get<double>(bytes, pos);
  b.path.compute = get<double>(bytes, pos);
  b.path.comm = get<double>(bytes, pos);
  b.path.reload = get<double>(bytes, pos);
  const auto n = get<uint16_t>(bytes, pos);
  for (uint16_t i = 0; i < n; ++i) {
    Piece p;
    p.layer = get<uint16_t>(bytes, pos);
    p.part = get<uint16_t>(bytes, pos);
    p.count = get<uint16_t>(bytes, pos);
    p.value = get_tensor(bytes, pos);
    b.pieces.push_back(std::move(p));
  }
  if (pos != bytes.size()) throw Error("trailing bytes after bundle");
  return b;
}

}  // namespace edgepart
