#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "fsenet/tensor.hpp"

namespace fsenet::nn {

// Reverse-mode tape. Ops record a backward closure only while grad mode is
// on and some parent requires grad; otherwise they produce detached nodes
// and intermediates free as soon as handles go out of scope.

inline thread_local int g_no_grad_depth = 0;
inline bool grad_enabled() { return g_no_grad_depth == 0; }

struct NoGradGuard {
  NoGradGuard() { ++g_no_grad_depth; }
  ~NoGradGuard() { --g_no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
};

inline thread_local int64_t g_node_counter = 0;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  int64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buf() {
    if (grad.empty()) grad = Tensor<T>::zeros(value.shape());
    return grad;
  }
};

template <typename T>
class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Value leaf(Tensor<T> v, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad && grad_enabled();
    n->id = ++g_node_counter;
    return Value(std::move(n));
  }

  static Value constant(Tensor<T> v) { return leaf(std::move(v), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& tensor() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  int height() const { return node_->value.height(); }
  int width() const { return node_->value.width(); }
  int channels() const { return node_->value.channels(); }

  std::shared_ptr<Node<T>> node() const { return node_; }
  Node<T>* raw() const { return node_.get(); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Records an op node. `back` receives the finished node; it reads
/// node.grad and accumulates into node.parents[i]->grad_buf().
template <typename T>
Value<T> make_op(Tensor<T> out, std::vector<Value<T>> parents, std::function<void(Node<T>&)> back) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(out);
  n->id = ++g_node_counter;
  bool need = grad_enabled();
  if (need) {
    need = false;
    for (const auto& p : parents)
      if (p.defined() && p.requires_grad()) {
        need = true;
        break;
      }
  }
  if (need) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(back);
  }
  return Value<T>(std::move(n));
}

/// Backpropagates from a scalar root (or with an explicit seed of the
/// root's shape). Touched leaves keep their grads until the graph dies.
template <typename T>
void backward(const Value<T>& root, Tensor<T> seed = {}) {
  if (!root.requires_grad()) throw Error("backward: root does not require grad");
  if (seed.empty()) {
    if (root.tensor().numel() != 1) throw ShapeError("backward: non-scalar root needs a seed");
    seed = Tensor<T>::full(root.tensor().shape(), T(1));
  }
  if (!seed.same_shape(root.tensor())) throw ShapeError("backward: seed shape mismatch");

  // Collect reachable nodes; creation ids give a valid topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.raw()};
  seen.insert(root.raw());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](Node<T>* a, Node<T>* b) { return a->id > b->id; });

  root.raw()->grad = std::move(seed);
  for (Node<T>* n : order) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace fsenet::nn
