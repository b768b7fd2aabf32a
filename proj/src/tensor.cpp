#include "longrisk/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace longrisk {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<detail::TensorNode>();
  n->data.assign(shape_numel(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = rng.normal() * stddev;
  return from_data(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("shape() on empty tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("data() on empty tensor");
  return {node_->data.data(), node_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("mutable_data() on empty tensor");
  return {node_->data.data(), node_->data.size()};
}

double Tensor::value() const {
  if (size() != 1) {
    throw ContractError("value() requires a single-element tensor, shape is " +
                        shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool rg) {
  if (!node_) throw ContractError("set_requires_grad() on empty tensor");
  node_->requires_grad = rg;
  return *this;
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("grad() requested but no gradient has been computed");
  }
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detached() const {
  if (!node_) return {};
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = node_->shape;
  n->data = node_->data;
  return wrap(std::move(n));
}

Tensor Tensor::clone() const { return detached(); }

void backward(const Tensor& loss) {
  auto* root = loss.node();
  if (!root) throw ContractError("backward() on empty tensor");
  if (root->data.size() != 1) {
    throw ContractError("backward() requires a scalar loss, shape is " +
                        shape_str(root->shape));
  }
  if (root->consumed) {
    throw ContractError(
        "backward() called on an already-consumed graph; rebuild the forward "
        "pass before differentiating again");
  }
  if (!root->requires_grad) {
    throw ContractError("backward() on a loss that is not connected to any "
                        "grad-requiring input");
  }

  // Iterative DFS topological order over the tape.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> seen;
  std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;

  // order holds children after their parents; walk it backwards.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
    node->consumed = true;
  }
  // Release the tape; leaf grads stay in place for the optimizer.
  for (auto* node : order) {
    node->backprop = nullptr;
    node->parents.clear();
  }
}

}  // namespace longrisk
