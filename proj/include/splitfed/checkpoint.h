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

#ifndef SPLITFED_CHECKPOINT_H_
#define SPLITFED_CHECKPOINT_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "splitfed/fedformer.h"
#include "splitfed/protocol.h"

namespace splitfed {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Strategy strategy = Strategy::kSplitGlobal;
  std::vector<SplitOneParams> split1;  // per grid station
  std::vector<SplitTwoParams> split2;  // 1 (global) or per grid station
};

Checkpoint Capture(const Federation& fed);
// Federation holding the checkpointed parameters, with fresh optimizer state.
std::unique_ptr<Federation> Restore(const Checkpoint& ckpt);

// Little-endian layout, see docs/formats.md:
//   "SPCK" | version u32 | 10 x u64 config | strategy u8 | gs count u32
//   | split2 count u32 | tensor count u32 | tensors as in wire frames
// Tensor names carry their owner: "gs<g>/split1.*", "sp<m>/split2.*".
std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& ckpt);
// DataError on malformed bytes, VersionError on another format version.
Checkpoint DecodeCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);
// Also throws VersionError when the stored model config differs from
// `expected`.
Checkpoint LoadCheckpoint(const std::string& path, const ModelConfig& expected);

}  // namespace splitfed

#endif  // SPLITFED_CHECKPOINT_H_
