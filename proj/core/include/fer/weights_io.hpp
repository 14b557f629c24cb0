// Copyright 2026 The fer Authors.
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

// Weights file layout (all integers little-endian):
//
//   bytes 0..3    magic "FERW"
//   bytes 4..7    u32 version (1)
//   bytes 8..15   u64 header length L
//   next L bytes  UTF-8 JSON header:
//                   {"config": {...ResNetConfig...},
//                    "tensors": [{"layer", "role", "shape", "offset"}, ...]}
//                 tensors are listed in build order; offset is the byte
//                 offset of the tensor within the payload
//   payload       float32 little-endian values, tensors in header order

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "fer/model.hpp"

namespace fer {

inline constexpr char kWeightsMagic[4] = {'F', 'E', 'R', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

void save_weights(const ResNet<float>& model, std::ostream& out);
void save_weights(const ResNet<float>& model,
                  const std::filesystem::path& path);

/// Rebuilds the network from the header's config, then fills every tensor.
/// Throws LoadError on bad magic/version, truncation, or a header entry that
/// does not match the layer the config builds (the message names the layer).
ResNet<float> load_weights(std::istream& in);
ResNet<float> load_weights(const std::filesystem::path& path);

}  // namespace fer
