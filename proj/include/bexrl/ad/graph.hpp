#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bexrl/ad/tensor.hpp"

namespace bexrl::ad {

// One vertex of the reverse-mode tape. Leaves have no inputs; interior nodes
// own a closure that pushes `grad` into their inputs' accumulators.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";

  Tensor& ensure_grad();
};

// Cheap handle to a node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  // Zero tensor of the value's shape when no gradient has reached this node.
  const Tensor& grad() const { return node_->ensure_grad(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var make_op(Tensor value, const std::vector<Var>& inputs, const char* op,
            std::function<void(Node&)> backward_fn);

// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls;
// interior gradients are reset at the start of every sweep.
void backward(const Var& loss);

}  // namespace bexrl::ad
