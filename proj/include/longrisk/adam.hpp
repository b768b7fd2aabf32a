#pragma once

#include <string>
#include <vector>

#include "longrisk/tensor.hpp"

namespace longrisk {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2, applied through the gradient
};

/// Adam over a fixed parameter list. Per-parameter moment state persists
/// across steps; step() expects every parameter to carry a gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

}  // namespace longrisk
