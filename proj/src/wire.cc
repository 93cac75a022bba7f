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

#include "splitfed/wire.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include "splitfed/errors.h"

namespace splitfed {
namespace {

constexpr std::uint32_t kNone = 0xFFFFFFFFu;
constexpr char kMagic[4] = {'S', 'P', 'L', 'F'};

class Writer {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void Bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void Need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ProtocolError("truncated frame");
  }
  std::uint8_t U8() {
    Need(1);
    return in_[pos_++];
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double F64() {
    Need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void WriteParty(Writer& w, const PartyId& p) {
  w.U8(static_cast<std::uint8_t>(p.role));
  w.U32(p.gs.value_or(kNone));
  w.U32(p.client.value_or(kNone));
}

PartyId ReadParty(Reader& r) {
  PartyId p;
  const std::uint8_t role = r.U8();
  if (role > 2) throw ProtocolError("unknown party role " + std::to_string(role));
  p.role = static_cast<Role>(role);
  const std::uint32_t gs = r.U32();
  const std::uint32_t client = r.U32();
  if (gs != kNone) p.gs = gs;
  if (client != kNone) p.client = client;
  p.Validate();
  return p;
}

bool StartsWith(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

void PartyId::Validate() const {
  bool ok = false;
  switch (role) {
    case Role::kClient:
      ok = gs.has_value() && client.has_value();
      break;
    case Role::kGridStation:
      ok = gs.has_value() && !client.has_value();
      break;
    case Role::kServiceProvider:
      ok = !gs.has_value() && !client.has_value();
      break;
  }
  if (!ok) throw ProtocolError("party indices do not match role: " + ToString());
}

std::string PartyId::ToString() const {
  auto idx = [](const std::optional<std::uint32_t>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  switch (role) {
    case Role::kClient:
      return "client(" + idx(gs) + "," + idx(client) + ")";
    case Role::kGridStation:
      return "gs(" + idx(gs) + ")";
    case Role::kServiceProvider:
      break;
  }
  return "sp";
}

const char* KindName(MessageKind kind) {
  switch (kind) {
    case MessageKind::kSplit1Weights:
      return "Split1Weights";
    case MessageKind::kActivations:
      return "Activations";
    case MessageKind::kPredictions:
      return "Predictions";
    case MessageKind::kLossGradients:
      return "LossGradients";
    case MessageKind::kActivationGradients:
      return "ActivationGradients";
    case MessageKind::kControlSync:
      return "ControlSync";
  }
  return "Unknown";
}

const Tensor& PartyMessage::Get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ProtocolError(std::string(KindName(kind)) + " from " + sender.ToString() +
                      " lacks tensor '" + name + "'");
}

std::vector<std::uint8_t> EncodeMessage(const PartyMessage& m) {
  m.sender.Validate();
  m.receiver.Validate();
  Writer w;
  w.Bytes(kMagic, 4);
  w.U8(kWireVersion);
  w.U8(static_cast<std::uint8_t>(m.kind));
  WriteParty(w, m.sender);
  WriteParty(w, m.receiver);
  w.U32(m.epoch);
  w.U32(m.batch);
  w.U32(static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& t : m.tensors) {
    w.U32(static_cast<std::uint32_t>(t.name.size()));
    w.Bytes(t.name.data(), t.name.size());
    w.U32(static_cast<std::uint32_t>(t.tensor.rank()));
    for (std::size_t d : t.tensor.shape()) w.U32(static_cast<std::uint32_t>(d));
    for (double v : t.tensor.data()) w.F64(v);
  }
  return w.Take();
}

PartyMessage DecodeMessage(std::span<const std::uint8_t> frame) {
  Reader r(frame);
  if (r.Str(4) != std::string(kMagic, 4)) throw ProtocolError("bad frame magic");
  const std::uint8_t version = r.U8();
  if (version != kWireVersion) {
    throw VersionError("wire version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kWireVersion) + ")");
  }
  PartyMessage m;
  const std::uint8_t kind = r.U8();
  if (kind > static_cast<std::uint8_t>(MessageKind::kControlSync)) {
    throw ProtocolError("unknown message kind " + std::to_string(kind));
  }
  m.kind = static_cast<MessageKind>(kind);
  m.sender = ReadParty(r);
  m.receiver = ReadParty(r);
  m.epoch = r.U32();
  m.batch = r.U32();
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.Str(r.U32());
    const std::uint32_t rank = r.U32();
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.U32();
      numel *= d;
    }
    if (numel > r.remaining() / 8) throw ProtocolError("truncated frame");
    std::vector<double> values(numel);
    for (double& v : values) v = r.F64();
    t.tensor = Tensor(std::move(shape), std::move(values));
    m.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw ProtocolError("trailing bytes after frame");
  return m;
}

void AuditPayload(const PartyMessage& m) {
  auto reject = [&](const std::string& name) {
    throw ProtocolError(std::string("payload audit: ") + KindName(m.kind) +
                        " from " + m.sender.ToString() +
                        " carries disallowed tensor '" + name + "'");
  };
  std::set<std::string> seen;
  for (const auto& t : m.tensors) {
    const std::string& n = t.name;
    if (StartsWith(n, "input.") || StartsWith(n, "target.")) reject(n);
    if (!seen.insert(n).second) reject(n + "' (duplicate");
    bool allowed = false;
    switch (m.kind) {
      case MessageKind::kSplit1Weights:
        allowed = StartsWith(n, "split1.");
        break;
      case MessageKind::kActivations:
        allowed = n == "enc_out" || n == "dec_seasonal" || n == "dec_trend";
        break;
      case MessageKind::kPredictions:
        allowed = n == "prediction";
        break;
      case MessageKind::kLossGradients:
        allowed = n == "loss_grad";
        break;
      case MessageKind::kActivationGradients:
        allowed = n == "grad_enc_out" || n == "grad_dec_seasonal" ||
                  n == "grad_dec_trend";
        break;
      case MessageKind::kControlSync:
        allowed = StartsWith(n, "control.");
        break;
    }
    if (!allowed) reject(n);
  }
  if (m.kind == MessageKind::kActivations && seen.size() != 3) {
    throw ProtocolError("payload audit: Activations from " + m.sender.ToString() +
                        " must carry exactly enc_out, dec_seasonal, dec_trend");
  }
}

}  // namespace splitfed
