#pragma once

// Minimal reverse-mode autodiff over dense tensors. Graphs are built
// define-by-run; creation order is a valid topological order, so backward
// visits nodes by decreasing sequence id. Templated on the scalar type:
// training runs float, gradcheck runs double.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "cbctox/error.hpp"

namespace cbctox::nn {

inline std::uint64_t next_node_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

template <class T>
class Tensor {
 public:
  struct Node {
    std::vector<std::int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated on demand, same length as value
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;  // accumulate own grad into parents'

    T* ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), T(0));
      return grad.data();
    }
  };

  Tensor() = default;

  static Tensor zeros(std::vector<std::int64_t> shape,
                      bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(std::vector<std::int64_t> shape, T fill,
                       bool requires_grad = false) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->value.assign(static_cast<std::size_t>(numel_of(t.n_->shape)), fill);
    t.n_->requires_grad = requires_grad;
    t.n_->seq = next_node_seq();
    return t;
  }

  static Tensor from(std::vector<std::int64_t> shape, std::vector<T> data,
                     bool requires_grad = false) {
    require(numel_of(shape) == std::int64_t(data.size()), "shape",
            "tensor data length does not match shape");
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(data);
    t.n_->requires_grad = requires_grad;
    t.n_->seq = next_node_seq();
    return t;
  }

  // result node wired to parents; backprop is attached by the op
  static Tensor result(std::vector<std::int64_t> shape,
                       std::vector<std::shared_ptr<Node>> parents) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->value.assign(static_cast<std::size_t>(numel_of(t.n_->shape)), T(0));
    for (const auto& p : parents)
      if (p && p->requires_grad) t.n_->requires_grad = true;
    t.n_->parents = std::move(parents);
    t.n_->seq = next_node_seq();
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<std::int64_t>& shape() const { return n_->shape; }
  std::int64_t dim(int i) const { return n_->shape[std::size_t(i)]; }
  int rank() const { return int(n_->shape.size()); }
  std::int64_t numel() const { return std::int64_t(n_->value.size()); }
  T* data() { return n_->value.data(); }
  const T* data() const { return n_->value.data(); }
  std::vector<T>& values() { return n_->value; }
  const std::vector<T>& values() const { return n_->value; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool v) { n_->requires_grad = v; }
  T* grad() { return n_->ensure_grad(); }
  const std::vector<T>& grad_vector() const { return n_->grad; }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }
  std::shared_ptr<Node> node() const { return n_; }

  T item() const {
    require(numel() == 1, "shape", "item() needs a scalar tensor");
    return n_->value[0];
  }

  void set_backprop(std::function<void()> fn) {
    if (n_->requires_grad) n_->backprop = std::move(fn);
  }

  // Reverse pass from a scalar. Seeds d(self)/d(self) = 1.
  void backward() {
    require(numel() == 1, "shape", "backward() needs a scalar loss");
    require(std::isfinite(double(n_->value[0])), "domain",
            "backward() on a non-finite loss");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{n_.get()};
    seen.insert(n_.get());
    while (!stack.empty()) {
      Node* cur = stack.back();
      stack.pop_back();
      if (!cur->requires_grad) continue;
      order.push_back(cur);
      for (const auto& p : cur->parents)
        if (p && p->requires_grad && seen.insert(p.get()).second)
          stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });
    n_->ensure_grad()[0] = T(1);
    for (Node* node : order) {
      node->ensure_grad();
      if (node->backprop) node->backprop();
    }
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
  }

 private:
  std::shared_ptr<Node> n_;
};

template <class T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

}  // namespace cbctox::nn
