#pragma once

#include <vector>

#include "longrisk/rng.hpp"
#include "longrisk/tensor.hpp"

// Differentiable tensor ops. Every op computes eagerly and, when any input
// requires a gradient, records itself on the tape consumed by backward().
// Broadcasting is limited to equal shapes and scalar-vs-tensor.

namespace longrisk::ops {

/// While alive, ops never record the tape even if inputs require gradients.
/// Used on pure-inference paths (validation loss, metric scoring).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

// c[m x n] = a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// c[m x n] = a[m x k] * b[n x k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// c[m x n] = a[k x m]^T * b[k x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// y[m] = a[m x k] * x[k]
Tensor matvec(const Tensor& a, const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiply by a compile-side constant (no gradient for the constant).
Tensor scale(const Tensor& x, double c);
// out[i, j] = m[i, j] + v[j]
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Training-time dropout: each element is zeroed with probability p and
/// survivors are scaled by 1/(1-p). Identity when train is false or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool train);

/// Softmax along `axis`. A value of -inf marks a masked position: it comes
/// out as exactly 0 and the rest of the lane renormalizes. A fully masked
/// lane throws InvalidMaskError.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Column means over a [rows x cols] matrix -> [cols].
Tensor mean_rows(const Tensor& x);

// Stack rank-1 tensors of equal length into a [n x len] matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);

// out[..., j] = sum_{j' <= j} x[..., j'] along the last axis.
Tensor cumsum_last(const Tensor& x);

// Row-wise layer normalization over [rows x cols] with affine gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Elementwise binary cross-entropy on logits against constant targets:
/// softplus(z) - y*z, gradient sigmoid(z) - y. Computed without forming
/// probabilities, stable for large |z|.
Tensor bce_logits(const Tensor& z, const std::vector<double>& targets);

}  // namespace longrisk::ops
