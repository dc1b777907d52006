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

#include <cstddef>
#include <functional>

namespace assoc3d {

/// Worker count from ASSOC3D_THREADS, else the hardware concurrency.
std::size_t thread_count();

/// Overrides the worker count for the rest of the process (0 restores the
/// environment default).
void set_thread_count(std::size_t n);

/// Runs body(begin, end) over disjoint contiguous chunks of [0, n). Each
/// index is handled by exactly one call, so results are independent of the
/// worker count as long as body writes only to its own indices.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1);

}  // namespace assoc3d
