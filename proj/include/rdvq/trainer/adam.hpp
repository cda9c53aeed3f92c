#pragma once

#include <vector>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::size_t steps = 0;
};

// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps). Moments are
// created on the first call, one per parameter in the given order.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace rdvq
