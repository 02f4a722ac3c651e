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

#include "edgepart/runtime/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "edgepart/error.hpp"

namespace edgepart {

TransportKind parse_transport(const std::string& name) {
  if (name == "in_process" || name == "inproc") return TransportKind::InProcess;
  if (name == "loopback" || name == "loopback_sockets") return TransportKind::Loopback;
  throw Error("unknown transport '" + name + "'");
}

std::string transport_name(TransportKind kind) {
  return kind == TransportKind::InProcess ? "in_process" : "loopback";
}

bool Transport::send(const std::string& address, const Message& m) {
  if (options_.simulate_latency) {
    const double s =
        comm_latency(static_cast<int64_t>(kHeaderBytes + m.payload.size()), options_.comm) * options_.latency_scale;
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  }
  const bool ok = deliver(address, m);
  ++(ok ? sent_ : failed_);
  return ok;
}

namespace {

bool enqueue(Inbox& inbox, Message m) {
  if (m.is_control()) return inbox.push_control(std::move(m));
  return inbox.push(std::move(m));
}

class InProcessTransport final : public Transport {
 public:
  using Transport::Transport;

  std::string attach(int endpoint, Inbox& inbox) override {
    std::lock_guard lock(mu_);
    std::string address = "inproc://" + std::to_string(endpoint);
    if (endpoints_.count(address)) throw Error("endpoint " + std::to_string(endpoint) + " already attached");
    endpoints_[address] = &inbox;
    return address;
  }

  void shutdown() override {
    std::lock_guard lock(mu_);
    endpoints_.clear();
  }

 protected:
  bool deliver(const std::string& address, const Message& m) override {
    Inbox* inbox = nullptr;
    {
      std::lock_guard lock(mu_);
      auto it = endpoints_.find(address);
      if (it == endpoints_.end()) return false;
      inbox = it->second;
    }
    return enqueue(*inbox, m);
  }

 private:
  std::mutex mu_;
  std::map<std::string, Inbox*> endpoints_;
};

bool write_all(int fd, const uint8_t* data, size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<size_t>(w);
  }
  return true;
}

bool read_all(int fd, uint8_t* data, size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    data += r;
    n -= static_cast<size_t>(r);
  }
  return true;
}

// One listening socket per endpoint. Each sender opens its own connection to
// each destination, so a blocked data stream never holds up another sender's
// control messages.
class LoopbackTransport final : public Transport {
 public:
  using Transport::Transport;
  ~LoopbackTransport() override { shutdown(); }

  std::string attach(int endpoint, Inbox& inbox) override {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw RuntimeFault(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw RuntimeFault("bind failed for endpoint " + std::to_string(endpoint) + ": " + why);
    }
    std::lock_guard lock(mu_);
    if (closed_) {
      ::close(fd);
      throw RuntimeFault("transport is shut down");
    }
    fds_.push_back(fd);
    threads_.emplace_back([this, fd, &inbox] { accept_loop(fd, inbox); });
    return "127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
  }

  void shutdown() override {
    std::vector<std::thread> threads;
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      closed_ = true;
      for (int fd : fds_) ::shutdown(fd, SHUT_RDWR);
      for (auto& [key, conn] : conns_) ::shutdown(conn->fd, SHUT_RDWR);
      threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    std::lock_guard lock(mu_);
    for (int fd : fds_) ::close(fd);
    for (auto& [key, conn] : conns_) ::close(conn->fd);
    fds_.clear();
    conns_.clear();
  }

 protected:
  bool deliver(const std::string& address, const Message& m) override {
    auto conn = connection(m.source, address);
    if (!conn) return false;
    const auto frame = encode_frame(m);
    std::lock_guard lock(conn->mu);
    return write_all(conn->fd, frame.data(), frame.size());
  }

 private:
  struct Conn {
    int fd = -1;
    std::mutex mu;
  };

  std::shared_ptr<Conn> connection(uint16_t source, const std::string& address) {
    std::lock_guard lock(mu_);
    if (closed_) return nullptr;
    const auto key = std::make_pair(source, address);
    auto it = conns_.find(key);
    if (it != conns_.end()) return it->second;
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) return nullptr;
    unsigned port = 0;
    const char* first = address.data() + colon + 1;
    const char* last = address.data() + address.size();
    auto [end, ec] = std::from_chars(first, last, port);
    if (ec != std::errc() || end != last || port == 0 || port > 65535) return nullptr;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, address.substr(0, colon).c_str(), &addr.sin_addr) != 1) return nullptr;
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return nullptr;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      return nullptr;
    }
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    conns_[key] = conn;
    return conn;
  }

  void accept_loop(int listen_fd, Inbox& inbox) {
    for (;;) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      std::lock_guard lock(mu_);
      if (closed_) {
        ::close(fd);
        return;
      }
      fds_.push_back(fd);
      threads_.emplace_back([fd, &inbox] { read_loop(fd, inbox); });
    }
  }

  static void read_loop(int fd, Inbox& inbox) {
    std::vector<uint8_t> header(kHeaderBytes);
    for (;;) {
      if (!read_all(fd, header.data(), header.size())) return;
      Message m;
      uint32_t len = 0;
      try {
        len = decode_header(header, m);
      } catch (const Error&) {
        return;
      }
      m.payload.resize(len);
      if (len > 0 && !read_all(fd, m.payload.data(), len)) return;
      if (!enqueue(inbox, std::move(m))) return;
    }
  }

  std::mutex mu_;
  bool closed_ = false;
  std::vector<int> fds_;
  std::vector<std::thread> threads_;
  std::map<std::pair<uint16_t, std::string>, std::shared_ptr<Conn>> conns_;
};

}  // namespace

std::unique_ptr<Transport> make_transport(TransportKind kind, TransportOptions options) {
  if (kind == TransportKind::InProcess) return std::make_unique<InProcessTransport>(options);
  return std::make_unique<LoopbackTransport>(options);
}

}  // namespace edgepart
