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

#ifndef SPLITFED_WIRE_H_
#define SPLITFED_WIRE_H_

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitfed/fedformer.h"

namespace splitfed {

enum class Role : std::uint8_t { kClient = 0, kGridStation = 1, kServiceProvider = 2 };

struct PartyId {
  Role role = Role::kServiceProvider;
  std::optional<std::uint32_t> gs;
  std::optional<std::uint32_t> client;

  static PartyId Client(std::uint32_t gs, std::uint32_t client) {
    return {Role::kClient, gs, client};
  }
  static PartyId GridStation(std::uint32_t gs) { return {Role::kGridStation, gs, {}}; }
  static PartyId ServiceProvider() { return {}; }

  // Throws ProtocolError when the indices do not fit the role.
  void Validate() const;
  std::string ToString() const;  // "client(1,3)", "gs(1)", "sp"

  auto operator<=>(const PartyId&) const = default;
};

enum class MessageKind : std::uint8_t {
  kSplit1Weights = 0,
  kActivations = 1,
  kPredictions = 2,
  kLossGradients = 3,
  kActivationGradients = 4,
  kControlSync = 5,
};

const char* KindName(MessageKind kind);

struct PartyMessage {
  MessageKind kind = MessageKind::kControlSync;
  PartyId sender;
  PartyId receiver;
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
  std::vector<NamedTensor> tensors;

  // Throws ProtocolError if `name` is missing.
  const Tensor& Get(const std::string& name) const;
};

inline constexpr std::uint8_t kWireVersion = 1;

// Frame layout (all integers little-endian):
//   "SPLF" | version u8 | kind u8 | sender | receiver | epoch u32 | batch u32
//   | tensor count u32 | per tensor: name length u32, name bytes, rank u32,
//   dims u32 x rank, values f64 x prod(dims)
// A party id is role u8, gs u32, client u32 with 0xFFFFFFFF for "none".
std::vector<std::uint8_t> EncodeMessage(const PartyMessage& message);
// Throws ProtocolError on malformed frames, VersionError on other versions.
PartyMessage DecodeMessage(std::span<const std::uint8_t> frame);

// Payload whitelist. Each kind admits only its own tensor names, and no
// name may look like raw client data ("input.*", "target.*").
//   Split1Weights        split1.*
//   Activations          enc_out, dec_seasonal, dec_trend (all three)
//   Predictions          prediction
//   LossGradients        loss_grad
//   ActivationGradients  grad_enc_out, grad_dec_seasonal, grad_dec_trend
//   ControlSync          control.*
void AuditPayload(const PartyMessage& message);

}  // namespace splitfed

#endif  // SPLITFED_WIRE_H_
