// Copyright 2026 The netmbt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Real backend: TCP over IPv4 loopback. Channel modes are the sockets' own
// O_NONBLOCK flags. Blocking calls first wait with poll() for at most the
// watchdog's remaining time, so an orchestration deadlock surfaces as
// WatchdogExpired instead of a hang.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/explorer.hpp"
#include "netmbt/socket_api.hpp"

namespace netmbt {

class PosixSocketApi final : public SocketApi {
 public:
  explicit PosixSocketApi(Watchdog* watchdog = nullptr) : watchdog_(watchdog) {}

  PosixSocketApi(const PosixSocketApi&) = delete;
  PosixSocketApi& operator=(const PosixSocketApi&) = delete;

  ~PosixSocketApi() override { close_all(); }

  // --- server channels ----------------------------------------------------

  ServerId open_server() override {
    const int fd = new_socket();
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const auto id = next_id_++;
    servers_[id] = ServerRec{fd};
    return ServerId{id};
  }

  Port bind(ServerId id, Port port) override {
    auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "bind");
    sockaddr_in addr = loopback(port);
    if (::bind(s.fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      const int err = errno;
      if (err == EINVAL) throw SutError(ErrorKind::AlreadyBound, errno_text(err));
      if (err == EADDRINUSE) throw SutError(ErrorKind::AddressInUse, errno_text(err));
      throw BackendError("bind: " + errno_text(err));
    }
    if (::listen(s.fd, SOMAXCONN) != 0) throw BackendError("listen: " + errno_text(errno));
    return sock_port(s.fd, false);
  }

  Port local_port(ServerId id) override {
    const auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "getLocalPort");
    const Port p = sock_port(s.fd, false);
    if (p == 0) throw SutError(ErrorKind::NotYetBound, "getLocalPort");
    return p;
  }

  std::optional<ConnId> accept(ServerId id) override {
    auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "accept");
    if (sock_port(s.fd, false) == 0) throw SutError(ErrorKind::NotYetBound, "accept");
    if (fd_blocking(s.fd)) wait_for(s.fd, POLLIN, "blocking accept");
    const int fd = ::accept4(s.fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      const int err = errno;
      if (err == EAGAIN || err == EWOULDBLOCK) return std::nullopt;
      if (err == EINVAL) throw SutError(ErrorKind::NotYetBound, errno_text(err));
      throw BackendError("accept: " + errno_text(err));
    }
    return adopt_conn(fd);
  }

  void close(ServerId id) override {
    auto& s = server(id);
    if (s.closed) return;
    s.blocking_at_close = fd_blocking(s.fd);
    s.closed = true;
    cancel_keys(id.value);
    ::close(s.fd);
  }

  // --- connection channels ------------------------------------------------

  ConnId connect(Port port) override {
    const int fd = new_socket();
    sockaddr_in addr = loopback(port);
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      const int err = errno;
      ::close(fd);
      if (err == ECONNREFUSED) throw SutError(ErrorKind::ConnectionRefused, errno_text(err));
      throw BackendError("connect: " + errno_text(err));
    }
    return adopt_conn(fd);
  }

  ReadResult read(ConnId id, std::size_t capacity) override {
    auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "read");
    if (c.in_shut) throw SutError(ErrorKind::InputShutdown, "read");
    if (capacity == 0) return {};
    if (fd_blocking(c.fd)) wait_for(c.fd, POLLIN, "blocking read");
    std::vector<std::byte> buf(capacity);
    const ssize_t n = ::recv(c.fd, buf.data(), buf.size(), 0);
    if (n < 0) {
      const int err = errno;
      if (err == EAGAIN || err == EWOULDBLOCK) return {};
      if (err == ECONNRESET || err == EPIPE) throw SutError(ErrorKind::ConnectionReset, errno_text(err));
      throw BackendError("recv: " + errno_text(err));
    }
    if (n == 0) return ReadResult::eos();
    buf.resize(static_cast<std::size_t>(n));
    return ReadResult{false, std::move(buf)};
  }

  std::size_t write(ConnId id, std::span<const std::byte> payload) override {
    auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "write");
    if (c.out_shut) throw SutError(ErrorKind::OutputShutdown, "write");
    if (payload.empty()) return 0;
    const bool blocking = fd_blocking(c.fd);
    std::size_t sent = 0;
    while (sent < payload.size()) {
      if (blocking) wait_for(c.fd, POLLOUT, "blocking write");
      const ssize_t n = ::send(c.fd, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        const int err = errno;
        if (err == EAGAIN || err == EWOULDBLOCK) {
          if (!blocking) break;
          continue;
        }
        if (err == ECONNRESET || err == EPIPE) throw SutError(ErrorKind::ConnectionReset, errno_text(err));
        throw BackendError("send: " + errno_text(err));
      }
      sent += static_cast<std::size_t>(n);
      if (!blocking) break;
    }
    return sent;
  }

  void shutdown_input(ConnId id) override {
    auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "shutdownInput");
    if (c.in_shut) return;
    half_close(c.fd, SHUT_RD);
    c.in_shut = true;
  }

  void shutdown_output(ConnId id) override {
    auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "shutdownOutput");
    if (c.out_shut) return;
    half_close(c.fd, SHUT_WR);
    c.out_shut = true;
  }

  void close(ConnId id) override {
    auto& c = conn(id);
    if (c.closed) return;
    c.blocking_at_close = fd_blocking(c.fd);
    c.closed = true;
    cancel_keys(id.value);
    ::close(c.fd);
  }

  Port local_port(ConnId id) override {
    const auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "getLocalPort");
    return sock_port(c.fd, false);
  }

  Port remote_port(ConnId id) override {
    const auto& c = conn(id);
    if (c.closed) throw SutError(ErrorKind::ClosedChannel, "getRemotePort");
    return c.remote;
  }

  // --- blocking mode and selectors ----------------------------------------

  void configure_blocking(ChannelRef ch, bool blocking) override {
    const int fd = channel_fd(ch);
    if (channel_closed(ch)) throw SutError(ErrorKind::ClosedChannel, "configureBlocking");
    if (blocking && registered(channel_id(ch))) {
      throw SutError(ErrorKind::IllegalBlockingMode, "channel is registered");
    }
    const int flags = ::fcntl(fd, F_GETFL);
    const int next = blocking ? (flags & ~O_NONBLOCK) : (flags | O_NONBLOCK);
    if (flags < 0 || ::fcntl(fd, F_SETFL, next) != 0) {
      throw BackendError("fcntl: " + errno_text(errno));
    }
  }

  bool is_blocking(ChannelRef ch) override {
    if (channel_closed(ch)) {
      if (const auto* s = std::get_if<ServerId>(&ch)) return server(*s).blocking_at_close;
      return conn(std::get<ConnId>(ch)).blocking_at_close;
    }
    return fd_blocking(channel_fd(ch));
  }

  SelectorId open_selector() override {
    const auto id = next_id_++;
    selectors_[id] = SelectorRec{};
    return SelectorId{id};
  }

  SelectorKey register_channel(SelectorId sel_id, ChannelRef ch, InterestSet interest) override {
    auto& sel = selector(sel_id);
    const bool is_server = std::holds_alternative<ServerId>(ch);
    const int fd = channel_fd(ch);
    if (channel_closed(ch)) throw SutError(ErrorKind::ClosedChannel, "register");
    const InterestSet valid = is_server ? kAccept : (kRead | kWrite);
    if (interest == 0 || (interest & ~valid) != 0) {
      throw SutError(ErrorKind::IllegalArgument, "interest set");
    }
    if (fd_blocking(fd)) throw SutError(ErrorKind::IllegalBlockingMode, "register");
    if (sel.closed) throw SutError(ErrorKind::ClosedChannel, "selector closed");
    for (auto& [key, reg] : sel.keys) {
      if (reg.channel == channel_id(ch)) {
        reg.interest = interest;
        return SelectorKey{key};
      }
    }
    const auto key = next_id_++;
    sel.keys[key] = Registration{channel_id(ch), is_server, interest};
    return SelectorKey{key};
  }

  void deregister(SelectorId sel_id, SelectorKey key) override {
    selector(sel_id).keys.erase(key.value);
  }

  ReadinessSet select_now(SelectorId sel_id) override {
    auto& sel = selector(sel_id);
    if (sel.closed) throw SutError(ErrorKind::ClosedChannel, "selectNow");
    std::vector<pollfd> fds;
    std::vector<std::uint32_t> keys;
    for (const auto& [key, reg] : sel.keys) {
      const int fd = reg.is_server ? servers_.at(reg.channel).fd : conns_.at(reg.channel).fd;
      short events = 0;
      if (reg.interest & (kAccept | kRead)) events |= POLLIN;
      if (reg.interest & kWrite) events |= POLLOUT;
      fds.push_back(pollfd{fd, events, 0});
      keys.push_back(key);
    }
    if (!fds.empty() && ::poll(fds.data(), fds.size(), 0) < 0) {
      throw BackendError("poll: " + errno_text(errno));
    }
    ReadinessSet out;
    for (std::size_t i = 0; i < fds.size(); ++i) {
      const auto& reg = sel.keys.at(keys[i]);
      const short re = fds[i].revents;
      InterestSet ready = 0;
      if (reg.is_server) {
        if (re & POLLIN) ready |= kAccept;
      } else {
        const auto& c = conns_.at(reg.channel);
        if (!c.in_shut && (re & (POLLIN | POLLHUP | POLLERR))) ready |= kRead;
        if (!c.out_shut && (re & (POLLOUT | POLLERR))) ready |= kWrite;
      }
      ready &= reg.interest;
      if (ready) out.push_back({SelectorKey{keys[i]}, ready});
    }
    return out;
  }

  void close(SelectorId sel_id) override {
    auto& sel = selector(sel_id);
    sel.closed = true;
    sel.keys.clear();
  }

  void tick() override {}

  void close_all() override {
    for (auto& [id, s] : servers_) close(ServerId{id});
    for (auto& [id, c] : conns_) close(ConnId{id});
    for (auto& [id, sel] : selectors_) close(SelectorId{id});
  }

 private:
  struct ServerRec {
    int fd = -1;
    bool closed = false;
    bool blocking_at_close = true;
  };

  struct ConnRec {
    int fd = -1;
    Port remote = 0;
    bool in_shut = false;
    bool out_shut = false;
    bool closed = false;
    bool blocking_at_close = true;
  };

  struct Registration {
    std::uint32_t channel = 0;
    bool is_server = false;
    InterestSet interest = 0;
  };

  struct SelectorRec {
    bool closed = false;
    std::map<std::uint32_t, Registration> keys;
  };

  static std::string errno_text(int err) { return std::strerror(err); }

  static sockaddr_in loopback(Port port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    return addr;
  }

  static int new_socket() {
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw BackendError("socket: " + errno_text(errno));
    return fd;
  }

  static Port sock_port(int fd, bool peer) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    const int rc = peer ? ::getpeername(fd, reinterpret_cast<sockaddr*>(&addr), &len)
                        : ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    if (rc != 0) return 0;
    return ntohs(addr.sin_port);
  }

  static bool fd_blocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL);
    return flags >= 0 && (flags & O_NONBLOCK) == 0;
  }

  static void half_close(int fd, int how) {
    // A connection the peer already reset reports ENOTCONN; the half is
    // gone either way.
    if (::shutdown(fd, how) != 0 && errno != ENOTCONN) {
      throw BackendError("shutdown: " + errno_text(errno));
    }
  }

  void wait_for(int fd, short events, const char* what) {
    int timeout_ms = -1;
    if (watchdog_) timeout_ms = static_cast<int>(watchdog_->remaining().count());
    pollfd p{fd, events, 0};
    for (;;) {
      const int rc = ::poll(&p, 1, timeout_ms);
      if (rc > 0) return;
      if (rc == 0) {
        throw WatchdogExpired(std::string(what) + " made no progress within " +
                              std::to_string(watchdog_->bound().count()) + " ms");
      }
      if (errno != EINTR) throw BackendError(std::string("poll: ") + errno_text(errno));
      if (watchdog_) timeout_ms = static_cast<int>(watchdog_->remaining().count());
    }
  }

  ConnId adopt_conn(int fd) {
    const auto id = next_id_++;
    ConnRec c;
    c.fd = fd;
    c.remote = sock_port(fd, true);
    conns_[id] = c;
    return ConnId{id};
  }

  ServerRec& server(ServerId id) {
    auto it = servers_.find(id.value);
    if (it == servers_.end()) throw std::invalid_argument("unknown server handle");
    return it->second;
  }
  ConnRec& conn(ConnId id) {
    auto it = conns_.find(id.value);
    if (it == conns_.end()) throw std::invalid_argument("unknown connection handle");
    return it->second;
  }
  SelectorRec& selector(SelectorId id) {
    auto it = selectors_.find(id.value);
    if (it == selectors_.end()) throw std::invalid_argument("unknown selector handle");
    return it->second;
  }

  static std::uint32_t channel_id(ChannelRef ch) {
    return std::visit([](auto h) { return h.value; }, ch);
  }
  int channel_fd(ChannelRef ch) {
    if (const auto* s = std::get_if<ServerId>(&ch)) return server(*s).fd;
    return conn(std::get<ConnId>(ch)).fd;
  }
  bool channel_closed(ChannelRef ch) {
    if (const auto* s = std::get_if<ServerId>(&ch)) return server(*s).closed;
    return conn(std::get<ConnId>(ch)).closed;
  }

  bool registered(std::uint32_t channel) const {
    for (const auto& [id, sel] : selectors_) {
      for (const auto& [key, reg] : sel.keys) {
        if (reg.channel == channel) return true;
      }
    }
    return false;
  }

  void cancel_keys(std::uint32_t channel) {
    for (auto& [id, sel] : selectors_) {
      std::erase_if(sel.keys, [&](const auto& kv) { return kv.second.channel == channel; });
    }
  }

  Watchdog* watchdog_;
  std::uint32_t next_id_ = 1;
  std::map<std::uint32_t, ServerRec> servers_;
  std::map<std::uint32_t, ConnRec> conns_;
  std::map<std::uint32_t, SelectorRec> selectors_;
};

}  // namespace netmbt
