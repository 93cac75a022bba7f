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

#include "splitfed/checkpoint.h"

#include <bit>
#include <fstream>
#include <iterator>
#include <map>

#include "splitfed/errors.h"

namespace splitfed {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};

class Writer {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F64(double v) { Le(std::bit_cast<std::uint64_t>(v), 8); }
  void Str(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t U8() { return static_cast<std::uint8_t>(Le(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Le(4)); }
  std::uint64_t U64() { return Le(8); }
  double F64() { return std::bit_cast<double>(Le(8)); }
  std::string Str() {
    const std::uint32_t n = U32();
    Need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void Need(std::size_t n) const {
    if (remaining() < n) throw DataError("checkpoint is truncated");
  }

 private:
  std::uint64_t Le(int n) {
    Need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint64_t> ConfigFields(const ModelConfig& c) {
  return {c.input_length, c.horizon,  c.series_dim, c.time_dim,      c.model_dim,
          c.ff_dim,       c.modes,    c.heads,      c.decomp_kernel, c.seed};
}

void WriteTensor(Writer& w, const std::string& name, const Tensor& t) {
  w.Str(name);
  w.U32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.U32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.F64(v);
}

std::string Owner(const std::string& prefix, std::size_t index) {
  return prefix + std::to_string(index) + "/";
}

}  // namespace

Checkpoint Capture(const Federation& fed) {
  Checkpoint c;
  c.config = fed.config();
  c.strategy = fed.strategy();
  for (std::size_t g = 0; g < fed.num_gs(); ++g) c.split1.push_back(fed.split1(g).Clone());
  for (const SplitTwoParams& p : fed.split2_models()) c.split2.push_back(p.Clone());
  return c;
}

std::unique_ptr<Federation> Restore(const Checkpoint& ckpt) {
  auto fed = std::make_unique<Federation>(ckpt.config, ckpt.strategy, ckpt.split1.size());
  std::vector<SplitOneParams> s1;
  std::vector<SplitTwoParams> s2;
  for (const auto& p : ckpt.split1) s1.push_back(p.Clone());
  for (const auto& p : ckpt.split2) s2.push_back(p.Clone());
  fed->SetParameters(std::move(s1), std::move(s2));
  return fed;
}

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char ch : kMagic) w.U8(static_cast<std::uint8_t>(ch));
  w.U32(kCheckpointVersion);
  for (std::uint64_t v : ConfigFields(ckpt.config)) w.U64(v);
  w.U8(ckpt.strategy == Strategy::kSplitGlobal ? 0 : 1);
  w.U32(static_cast<std::uint32_t>(ckpt.split1.size()));
  w.U32(static_cast<std::uint32_t>(ckpt.split2.size()));
  std::vector<std::pair<std::string, Tensor>> all;
  for (std::size_t g = 0; g < ckpt.split1.size(); ++g) {
    for (NamedTensor& t : ExportSplitOne(ckpt.split1[g])) {
      all.emplace_back(Owner("gs", g) + t.name, t.tensor);
    }
  }
  for (std::size_t m = 0; m < ckpt.split2.size(); ++m) {
    for (NamedTensor& t : ExportSplitTwo(ckpt.split2[m])) {
      all.emplace_back(Owner("sp", m) + t.name, t.tensor);
    }
  }
  w.U32(static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) WriteTensor(w, name, t);
  return w.Take();
}

Checkpoint DecodeCheckpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char ch : kMagic) {
    if (r.U8() != static_cast<std::uint8_t>(ch)) throw DataError("not a checkpoint file");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       ", this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  std::uint64_t f[10];
  for (auto& v : f) v = r.U64();
  c.config.input_length = f[0];
  c.config.horizon = f[1];
  c.config.series_dim = f[2];
  c.config.time_dim = f[3];
  c.config.model_dim = f[4];
  c.config.ff_dim = f[5];
  c.config.modes = f[6];
  c.config.heads = f[7];
  c.config.decomp_kernel = f[8];
  c.config.seed = f[9];
  try {
    c.config.Validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }
  const std::uint8_t strategy = r.U8();
  if (strategy > 1) throw DataError("unknown strategy code in checkpoint");
  c.strategy = strategy == 0 ? Strategy::kSplitGlobal : Strategy::kSplitPersonal;
  const std::uint32_t n1 = r.U32();
  const std::uint32_t n2 = r.U32();
  if (n1 == 0 || n2 != (c.strategy == Strategy::kSplitGlobal ? 1u : n1)) {
    throw DataError("checkpoint model counts do not fit the strategy");
  }
  const std::uint32_t count = r.U32();
  std::map<std::string, std::vector<NamedTensor>> groups;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.Str();
    const std::uint32_t rank = r.U32();
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.U32();
      n *= d;
    }
    r.Need(n * 8);
    std::vector<double> values(n);
    for (double& v : values) v = r.F64();
    const std::size_t slash = name.find('/');
    if (slash == std::string::npos) throw DataError("checkpoint tensor '" + name + "' has no owner");
    groups[name.substr(0, slash)].push_back(
        {name.substr(slash + 1), Tensor(std::move(shape), std::move(values))});
  }
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint");
  try {
    for (std::uint32_t g = 0; g < n1; ++g) {
      c.split1.push_back(ImportSplitOne(groups["gs" + std::to_string(g)], c.config));
    }
    for (std::uint32_t m = 0; m < n2; ++m) {
      c.split2.push_back(ImportSplitTwo(groups["sp" + std::to_string(m)], c.config));
    }
  } catch (const LookupError& e) {
    throw DataError(std::string("incomplete checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return c;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = EncodeCheckpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

Checkpoint LoadCheckpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint c = LoadCheckpoint(path);
  if (!(c.config == expected)) {
    throw VersionError("checkpoint " + path +
                       " was trained with a different model configuration");
  }
  return c;
}

}  // namespace splitfed
