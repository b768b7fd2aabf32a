#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "longrisk/errors.hpp"
#include "longrisk/rng.hpp"

namespace longrisk {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

/// One node of the reverse-mode tape. Produced tensors that depend on a
/// grad-requiring input keep their parents and a backprop closure; leaves and
/// detached values carry data only.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // allocated on first accumulation

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;
  const char* op = nullptr;
  bool consumed = false;  // set once a backward pass has run through it

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major float64 tensor with optional gradient tracking.
/// Handle semantics: copies share the underlying node, so an optimizer update
/// through one handle is visible through all of them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// I.i.d. normal entries, mean 0, given stddev.
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double operator[](std::size_t i) const { return data()[i]; }

  /// Value of a single-element tensor.
  double value() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool rg);

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Same data, detached from the tape and never tracking gradients.
  Tensor detached() const;
  /// Deep copy of the data (detached).
  Tensor clone() const;

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Reverse-mode sweep from a scalar loss. Populates grad on every
/// requires_grad leaf reachable from it and consumes the graph; a second
/// call on the same graph throws ContractError.
void backward(const Tensor& loss);

}  // namespace longrisk
