// Copyright 2026 The assoc3d Authors
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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "assoc3d/tensor.hpp"

namespace assoc3d::ad {

/// Named parameters, iterated in name order.
using ParameterSet = std::map<std::string, Tensor>;

/// Binary container:
///   "A3DCKPT\0" | u32 version | u32 count |
///   count x { u32 name_len | name | u32 rank | u64 dims[rank] | f64 data[] }
/// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> serialize(const ParameterSet& params);
ParameterSet deserialize(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over names, shapes and raw float bytes.
std::uint64_t fingerprint(const ParameterSet& params);

}  // namespace assoc3d::ad
