// Copyright 2026 The Social PaL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <utility>

#include "socialpal/discovery_client.hpp"
#include "socialpal/psi_session.hpp"

namespace socialpal {

class SocketError : public Error {
 public:
  using Error::Error;
};

/// Owning file descriptor.
class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  UniqueFd(UniqueFd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  UniqueFd& operator=(UniqueFd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  ~UniqueFd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline constexpr std::size_t kMaxFramePayload = std::size_t{64} << 20;

/// Relays discovery frames over a connected stream socket. Frames are
/// self-delimiting: the envelope header carries the payload length.
class SocketTransport : public FrameTransport {
 public:
  explicit SocketTransport(UniqueFd fd) : fd_(std::move(fd)) {}

  void send(ByteView frame) override {
    std::size_t off = 0;
    while (off < frame.size()) {
      const auto n = ::send(fd_.get(), frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SocketError(std::string("send: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  Bytes receive() override {
    Bytes frame(psi::kEnvelopeHeaderBytes);
    read_exact(frame.data(), frame.size());
    const std::size_t len = read_u32be(ByteView(frame).subspan(psi::kEnvelopeHeaderBytes - 4, 4));
    if (len > kMaxFramePayload) throw SocketError("frame too large");
    frame.resize(psi::kEnvelopeHeaderBytes + len);
    read_exact(frame.data() + psi::kEnvelopeHeaderBytes, len);
    return frame;
  }

 private:
  void read_exact(std::uint8_t* out, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      const auto r = ::recv(fd_.get(), out + off, n - off, 0);
      if (r == 0) throw SocketError("peer closed connection");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw SocketError(std::string("recv: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(r);
    }
  }

  UniqueFd fd_;
};

/// Two connected stream sockets (AF_UNIX).
inline std::pair<UniqueFd, UniqueFd> socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw SocketError(std::string("socketpair: ") + std::strerror(errno));
  return {UniqueFd(fds[0]), UniqueFd(fds[1])};
}

/// Listening TCP socket on 127.0.0.1; port 0 picks a free port.
inline std::pair<UniqueFd, int> listen_loopback(int port = 0) {
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd) throw SocketError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw SocketError(std::string("bind: ") + std::strerror(errno));
  if (::listen(fd.get(), 4) != 0) throw SocketError(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  return {std::move(fd), ntohs(addr.sin_port)};
}

inline UniqueFd accept_one(const UniqueFd& listener) {
  UniqueFd fd(::accept(listener.get(), nullptr, nullptr));
  if (!fd) throw SocketError(std::string("accept: ") + std::strerror(errno));
  return fd;
}

inline UniqueFd connect_loopback(int port) {
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd) throw SocketError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw SocketError(std::string("connect: ") + std::strerror(errno));
  return fd;
}

}  // namespace socialpal
