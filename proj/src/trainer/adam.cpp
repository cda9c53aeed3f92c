#include "rdvq/trainer/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rdvq {

template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: parameter list changed");
  ++state.steps;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.steps));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    if (m.shape() != p.value.shape() || p.grad.shape() != p.value.shape())
      throw std::invalid_argument("adam_step: moment shape mismatch for " + p.name);
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = double(p.grad[k]);
      const double mk = cfg.beta1 * double(m[k]) + (1.0 - cfg.beta1) * g;
      const double vk = cfg.beta2 * double(v[k]) + (1.0 - cfg.beta2) * g * g;
      m[k] = T(mk);
      v[k] = T(vk);
      if (g == 0.0 && mk == 0.0) continue;
      p.value[k] = T(double(p.value[k]) - lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.eps));
    }
  }
}

template void adam_step<float>(const std::vector<Parameter<float>*>&, AdamState<float>&, double,
                               const AdamConfig&);
template void adam_step<double>(const std::vector<Parameter<double>*>&, AdamState<double>&, double,
                                const AdamConfig&);

}  // namespace rdvq
