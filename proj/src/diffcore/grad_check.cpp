#include "rdvq/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rdvq/diffcore/ops.hpp"

namespace rdvq {

namespace {

template <typename T>
struct Evaluation {
  T loss = 0;
  std::vector<Tensor<T>> grads;
  bool finite = true;
};

template <typename T>
Evaluation<T> evaluate(const GraphBuilder<T>& build, const std::vector<Tensor<T>>& point,
                       uint64_t seed, bool with_grad) {
  Graph<T> g;
  std::vector<Var<T>> inputs;
  for (const auto& p : point) inputs.push_back(g.input(p));
  Var<T> out = build(g, inputs);
  Evaluation<T> ev;
  ev.finite = all_finite(out.value());
  if (out.value().size() != 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor<T> w(out.value().shape());
    for (auto& v : w.values()) v = static_cast<T>(u(rng));
    out = dot(out, g.constant(std::move(w)));
  }
  ev.loss = out.value()[0];
  ev.finite = ev.finite && std::isfinite(static_cast<double>(ev.loss));
  if (with_grad) {
    g.backward(out);
    for (const auto& in : inputs) ev.grads.push_back(in.grad());
    for (const auto& gr : ev.grads) ev.finite = ev.finite && all_finite(gr);
  }
  return ev;
}

}  // namespace

template <typename T>
GradCheckResult grad_check(const GraphBuilder<T>& build, const std::vector<Tensor<T>>& point,
                           T eps, uint64_t seed) {
  GradCheckResult result;
  if (!(eps > T(0))) {
    result.finite = false;
    result.message = "eps must be positive";
    return result;
  }
  const Evaluation<T> base = evaluate(build, point, seed, true);
  if (!base.finite) {
    result.finite = false;
    result.message = "non-finite value in forward or backward pass";
    return result;
  }
  std::vector<Tensor<T>> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const T orig = point[k][i];
      probe[k][i] = orig + eps;
      const Evaluation<T> plus = evaluate(build, probe, seed, false);
      probe[k][i] = orig - eps;
      const Evaluation<T> minus = evaluate(build, probe, seed, false);
      probe[k][i] = orig;
      if (!plus.finite || !minus.finite) {
        result.finite = false;
        result.message = "non-finite value at perturbed input " + std::to_string(k) + "[" +
                         std::to_string(i) + "]";
        return result;
      }
      const double numeric = (static_cast<double>(plus.loss) - static_cast<double>(minus.loss)) /
                             (2.0 * static_cast<double>(eps));
      const double analytic = static_cast<double>(base.grads[k][i]);
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.message = "worst at input " + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

template GradCheckResult grad_check<float>(const GraphBuilder<float>&,
                                           const std::vector<Tensor<float>>&, float, uint64_t);
template GradCheckResult grad_check<double>(const GraphBuilder<double>&,
                                            const std::vector<Tensor<double>>&, double, uint64_t);

}  // namespace rdvq
