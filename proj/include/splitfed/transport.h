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

#ifndef SPLITFED_TRANSPORT_H_
#define SPLITFED_TRANSPORT_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "splitfed/wire.h"

namespace splitfed {

// Sees every frame after it passed the payload audit. Calls are serialized.
using AuditHook =
    std::function<void(const PartyMessage&, std::span<const std::uint8_t>)>;

// Frames are queued per (receiver, sender) pair, so a receiver that reads
// its peers in a fixed order sees the same sequence however the senders'
// threads interleave.
class Transport {
 public:
  virtual ~Transport() = default;

  // Encodes, audits (AuditPayload + hook) and delivers.
  virtual void Send(const PartyMessage& message) = 0;

  // Next frame from `sender` addressed to `receiver`. Throws ProtocolError
  // naming the silent sender on timeout, or when the kind differs.
  PartyMessage Receive(const PartyId& receiver, const PartyId& sender,
                       MessageKind kind, std::chrono::milliseconds timeout);

  void SetAuditHook(AuditHook hook);
  // Frame bytes sent so far, per message kind.
  std::map<MessageKind, std::uint64_t> BytesByKind() const;

 protected:
  void Audit(const PartyMessage& message, std::span<const std::uint8_t> frame);
  void Deliver(const PartyId& receiver, const PartyId& sender,
               std::vector<std::uint8_t> frame);

 private:
  using Route = std::pair<PartyId, PartyId>;  // (receiver, sender)

  mutable std::mutex audit_mu_;
  AuditHook hook_;
  std::map<MessageKind, std::uint64_t> bytes_;

  std::mutex mail_mu_;
  std::condition_variable mail_cv_;
  std::map<Route, std::deque<std::vector<std::uint8_t>>> mailboxes_;
};

class InProcessTransport : public Transport {
 public:
  void Send(const PartyMessage& message) override;
};

// Frames travel over a TCP connection on 127.0.0.1 as u32 length + frame;
// a reader thread files them into the same mailboxes.
class LoopbackSocketTransport : public Transport {
 public:
  LoopbackSocketTransport();
  ~LoopbackSocketTransport() override;
  LoopbackSocketTransport(const LoopbackSocketTransport&) = delete;
  LoopbackSocketTransport& operator=(const LoopbackSocketTransport&) = delete;

  void Send(const PartyMessage& message) override;

 private:
  void ReadLoop();

  int send_fd_ = -1;
  int recv_fd_ = -1;
  std::mutex send_mu_;
  std::thread reader_;
};

}  // namespace splitfed

#endif  // SPLITFED_TRANSPORT_H_
