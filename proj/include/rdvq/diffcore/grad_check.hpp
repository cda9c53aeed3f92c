#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rdvq/diffcore/graph.hpp"

namespace rdvq {

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool finite = true;
  std::string message;

  bool passed(double tol) const { return finite && max_rel_error <= tol; }
};

// Builds the op under test from graph inputs; called once per evaluation.
template <typename T>
using GraphBuilder = std::function<Var<T>(Graph<T>&, std::span<const Var<T>>)>;

// Compares backward() against central differences at `point`, coordinate by
// coordinate: max |analytic - numeric| / max(1, |numeric|). Non-scalar
// outputs are reduced with fixed pseudo-random weights drawn from `seed`.
template <typename T>
GradCheckResult grad_check(const GraphBuilder<T>& build, const std::vector<Tensor<T>>& point,
                           T eps = T(1e-5), uint64_t seed = 7);

}  // namespace rdvq
