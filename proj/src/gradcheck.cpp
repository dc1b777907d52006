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

#include "assoc3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace assoc3d::ad {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.constant(t));
  const double v = f(tape, leaves).value().item();
  if (!std::isfinite(v)) throw std::runtime_error("gradient_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps,
                               const std::vector<bool>& check) {
  auto wanted = [&](std::size_t i) { return check.empty() || check.at(i); };

  Tape tape;
  std::vector<Var> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.leaf(inputs[i], wanted(i)));
  const Var out = f(tape, leaves);
  if (!std::isfinite(out.value().item())) throw std::runtime_error("gradient_check: non-finite function value");
  tape.backward(out);

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!wanted(i)) continue;
    const Tensor analytic = tape.grad(leaves[i]);
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      const double orig = inputs[i][e];
      probe[i][e] = orig + eps;
      const double up = evaluate(f, probe);
      probe[i][e] = orig - eps;
      const double down = evaluate(f, probe);
      probe[i][e] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[e];
      if (!std::isfinite(a)) throw std::runtime_error("gradient_check: non-finite analytic gradient");
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.elements_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_input = i;
        report.worst_element = e;
      }
    }
  }
  return report;
}

}  // namespace assoc3d::ad
