#include "rdvq/diffcore/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace rdvq {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
Var<T> Graph<T>::push(Node node) {
  if (backward_done_) throw std::logic_error("graph already consumed by backward()");
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value, std::vector<std::size_t> segments) {
  Node n;
  n.value = std::move(value);
  n.segments = std::move(segments);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::input(Tensor<T> value, std::vector<std::size_t> segments) {
  Node n;
  n.value = std::move(value);
  n.segments = std::move(segments);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  Var<T> v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn,
                        std::vector<std::size_t> segments) {
  Node n;
  n.value = std::move(value);
  n.segments = std::move(segments);
  for (const auto& in : inputs) {
    if (in.graph() != this) throw std::invalid_argument("op input belongs to a different graph");
    n.requires_grad = n.requires_grad || nodes_.at(in.id()).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Graph<T>::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value.shape(), T(0));
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
Tensor<T>& Graph<T>::accumulate_grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value.shape(), T(0));
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
std::vector<std::size_t> Graph<T>::segments(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (!n.segments.empty()) return n.segments;
  if (n.value.rank() == 2) return {n.value.dim(1)};
  return {};
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (!loss.valid() || loss.graph() != this || loss.id() >= nodes_.size())
    throw std::logic_error("backward() called without a forward pass on this graph");
  if (backward_done_) throw std::logic_error("backward() already ran on this graph");
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1)
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                shape_str(root.value.shape()));
  backward_done_ = true;
  accumulate_grad(loss.id())[0] = T(1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
  }
  for (auto& [param, id] : param_nodes_) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (param->grad.shape() != param->value.shape())
      param->grad = Tensor<T>(param->value.shape(), T(0));
    for (std::size_t k = 0; k < n.grad.size(); ++k) param->grad[k] += n.grad[k];
  }
}

template class Graph<float>;
template class Graph<double>;
template bool all_finite<float>(const Tensor<float>&);
template bool all_finite<double>(const Tensor<double>&);

}  // namespace rdvq
