#include "bexrl/ad/graph.hpp"

#include <unordered_set>
#include <utility>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {

Tensor& Node::ensure_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "const";
  return Var(std::move(n));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->grad = Tensor(n->value.shape(), 0.0);
  return Var(std::move(n));
}

void Var::zero_grad() { node_->ensure_grad().fill(0.0); }

Var make_op(Tensor value, const std::vector<Var>& inputs, const char* op,
            std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (const auto& in : inputs) n->inputs.push_back(in.ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    fail(ErrorKind::kNonScalarLoss, "backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Post-order DFS gives a topological order; walk it backwards.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(&loss.node(), 0);
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->inputs.empty()) n->ensure_grad().fill(0.0);
  }
  loss.node().ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace bexrl::ad
