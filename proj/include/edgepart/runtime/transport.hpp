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

#ifndef EDGEPART_RUNTIME_TRANSPORT_HPP
#define EDGEPART_RUNTIME_TRANSPORT_HPP

#include <atomic>
#include <memory>
#include <string>

#include "edgepart/cost_model.hpp"
#include "edgepart/runtime/inbox.hpp"
#include "edgepart/runtime/wire.hpp"

namespace edgepart {

using Inbox = BoundedInbox<Message>;

enum class TransportKind { InProcess, Loopback };

TransportKind parse_transport(const std::string& name);
std::string transport_name(TransportKind kind);

struct TransportOptions {
  // Delays each send by comm_latency(frame bytes) * latency_scale.
  bool simulate_latency = false;
  CommModel comm;
  double latency_scale = 1.0;
};

class Transport {
 public:
  explicit Transport(TransportOptions options) : options_(options) {}
  virtual ~Transport() = default;
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  // Registers an endpoint and returns its address.
  virtual std::string attach(int endpoint, Inbox& inbox) = 0;
  virtual void shutdown() = 0;

  // Data blocks while the destination inbox is full; control never does.
  // False when the address is unknown or unreachable.
  bool send(const std::string& address, const Message& m);

  int64_t sent() const { return sent_; }
  int64_t failed() const { return failed_; }

 protected:
  virtual bool deliver(const std::string& address, const Message& m) = 0;

 private:
  TransportOptions options_;
  std::atomic<int64_t> sent_{0};
  std::atomic<int64_t> failed_{0};
};

std::unique_ptr<Transport> make_transport(TransportKind kind, TransportOptions options = {});

}  // namespace edgepart

#endif  // EDGEPART_RUNTIME_TRANSPORT_HPP
