// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "splitfed/transport.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>
#include <string>

#include "splitfed/errors.h"

namespace splitfed {

PartyMessage Transport::Receive(const PartyId& receiver, const PartyId& sender,
                                MessageKind kind,
                                std::chrono::milliseconds timeout) {
  std::vector<std::uint8_t> frame;
  {
    std::unique_lock<std::mutex> lock(mail_mu_);
    const Route route{receiver, sender};
    const bool arrived = mail_cv_.wait_for(lock, timeout, [&] {
      auto it = mailboxes_.find(route);
      return it != mailboxes_.end() && !it->second.empty();
    });
    if (!arrived) {
      throw ProtocolError(receiver.ToString() + " timed out after " +
                          std::to_string(timeout.count()) + " ms waiting for " +
                          KindName(kind) + " from " + sender.ToString() +
                          "; round aborted");
    }
    auto& box = mailboxes_[route];
    frame = std::move(box.front());
    box.pop_front();
  }
  PartyMessage m = DecodeMessage(frame);
  if (m.kind != kind) {
    throw ProtocolError(receiver.ToString() + " expected " + KindName(kind) +
                        " from " + sender.ToString() + ", got " + KindName(m.kind));
  }
  return m;
}

void Transport::SetAuditHook(AuditHook hook) {
  std::lock_guard<std::mutex> lock(audit_mu_);
  hook_ = std::move(hook);
}

std::map<MessageKind, std::uint64_t> Transport::BytesByKind() const {
  std::lock_guard<std::mutex> lock(audit_mu_);
  return bytes_;
}

void Transport::Audit(const PartyMessage& message,
                      std::span<const std::uint8_t> frame) {
  AuditPayload(message);
  std::lock_guard<std::mutex> lock(audit_mu_);
  bytes_[message.kind] += frame.size();
  if (hook_) hook_(message, frame);
}

void Transport::Deliver(const PartyId& receiver, const PartyId& sender,
                        std::vector<std::uint8_t> frame) {
  {
    std::lock_guard<std::mutex> lock(mail_mu_);
    mailboxes_[{receiver, sender}].push_back(std::move(frame));
  }
  mail_cv_.notify_all();
}

void InProcessTransport::Send(const PartyMessage& message) {
  std::vector<std::uint8_t> frame = EncodeMessage(message);
  Audit(message, frame);
  Deliver(message.receiver, message.sender, std::move(frame));
}

namespace {

[[noreturn]] void SocketFailure(const char* what) {
  throw ProtocolError(std::string("loopback transport: ") + what + ": " +
                      std::strerror(errno));
}

bool WriteAll(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool ReadAll(int fd, std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, p, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

LoopbackSocketTransport::LoopbackSocketTransport() {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) SocketFailure("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listener, 1) != 0 ||
      ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(listener);
    SocketFailure("bind/listen");
  }
  send_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (send_fd_ < 0 ||
      ::connect(send_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listener);
    SocketFailure("connect");
  }
  recv_fd_ = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (recv_fd_ < 0) SocketFailure("accept");
  const int one = 1;
  ::setsockopt(send_fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  reader_ = std::thread([this] { ReadLoop(); });
}

LoopbackSocketTransport::~LoopbackSocketTransport() {
  ::shutdown(send_fd_, SHUT_RDWR);
  ::shutdown(recv_fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  ::close(send_fd_);
  ::close(recv_fd_);
}

void LoopbackSocketTransport::Send(const PartyMessage& message) {
  std::vector<std::uint8_t> frame = EncodeMessage(message);
  Audit(message, frame);
  std::uint8_t prefix[4];
  const auto n = static_cast<std::uint32_t>(frame.size());
  for (int i = 0; i < 4; ++i) prefix[i] = static_cast<std::uint8_t>(n >> (8 * i));
  std::lock_guard<std::mutex> lock(send_mu_);
  if (!WriteAll(send_fd_, prefix, 4) || !WriteAll(send_fd_, frame.data(), frame.size())) {
    SocketFailure("send");
  }
}

void LoopbackSocketTransport::ReadLoop() {
  for (;;) {
    std::uint8_t prefix[4];
    if (!ReadAll(recv_fd_, prefix, 4)) return;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(prefix[i]) << (8 * i);
    std::vector<std::uint8_t> frame(n);
    if (!ReadAll(recv_fd_, frame.data(), n)) return;
    try {
      PartyMessage m = DecodeMessage(frame);
      Deliver(m.receiver, m.sender, std::move(frame));
    } catch (const Error& e) {
      // The receiver will time out and name the sender it was waiting on.
      std::cerr << "loopback transport: dropped frame: " << e.what() << '\n';
    }
  }
}

}  // namespace splitfed
