#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

template <typename T>
class Graph;

// Handle to a node of one Graph. Copyable; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  std::size_t id() const { return id_; }
  Graph<T>* graph() const { return graph_; }

  const Tensor<T>& value() const { return graph_->value(id_); }
  // Gradient after backward(); zeros if the loss did not depend on this node.
  const Tensor<T>& grad() const { return graph_->grad(id_); }
  // Lengths of the sequences packed along the column axis.
  std::vector<std::size_t> segments() const { return graph_->segments(id_); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Records one forward pass. Nodes are appended in execution order, which is
// a topological order, and backward() walks them once in reverse.
template <typename T>
class Graph {
 public:
  // Receives the node's accumulated output gradient and pushes it into
  // its inputs through accumulate_grad().
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives gradient.
  Var<T> constant(Tensor<T> value, std::vector<std::size_t> segments = {});
  // Leaf whose gradient is kept and readable via Var::grad().
  Var<T> input(Tensor<T> value, std::vector<std::size_t> segments = {});
  // Leaf bound to a Parameter; backward() adds into Parameter::grad.
  // Reusing the same Parameter returns the same node.
  Var<T> parameter(Parameter<T>& p);

  // Appends an op node. `fn` is skipped when no input requires gradient.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn,
                std::vector<std::size_t> segments = {});

  // Requires a scalar (single element) loss. Runs at most once per graph.
  void backward(Var<T> loss);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor<T>& grad(std::size_t id);
  std::vector<std::size_t> segments(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  // Gradient buffer of an input node, created as zeros on first use.
  Tensor<T>& accumulate_grad(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::vector<std::size_t> segments;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<Parameter<T>*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace rdvq
