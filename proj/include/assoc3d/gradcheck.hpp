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

#include <functional>
#include <span>
#include <vector>

#include "assoc3d/tape.hpp"

namespace assoc3d::ad {

/// Builds a scalar from leaves already placed on the tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  std::size_t elements_checked = 0;
};

/// Compares tape gradients of f against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps), element by element, for every input whose
/// `check` flag is set (all when empty). The error of one element is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Throws std::runtime_error on a non-finite value.
GradCheckReport gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5,
                               const std::vector<bool>& check = {});

}  // namespace assoc3d::ad
