#pragma once

#include <cstddef>

// Dense numeric kernels backing the tensor ops.
//
// Every kernel exists twice: a serial reference under kernels::serial and an
// OpenMP-parallel version in kernels:: that falls back to the serial loop
// below a work threshold. The parallel versions split work only across
// independent output elements and keep every per-element reduction in the
// same index order as the reference, so both produce bit-identical results
// for any thread count. The test suite asserts that equivalence.

namespace longrisk::kernels {

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

// c[m x n] = a[m x k] * b[n x k]^T
void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

// c[m x n] = a[k x m]^T * b[k x n]
void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

void vadd(const double* a, const double* b, double* out, std::size_t n);
void vsub(const double* a, const double* b, double* out, std::size_t n);
void vmul(const double* a, const double* b, double* out, std::size_t n);
void vadd_scalar(const double* a, double s, double* out, std::size_t n);
void vmul_scalar(const double* a, double s, double* out, std::size_t n);
void vrelu(const double* x, double* out, std::size_t n);
void vsigmoid(const double* x, double* out, std::size_t n);

// Row-wise softmax; -inf entries come out as exactly 0. Caller guarantees at
// least one finite entry per row.
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
// dx = y .* (dy - rowdot(dy, y))
void softmax_backward_rows(const double* y, const double* dy, double* dx,
                           std::size_t rows, std::size_t cols);

// Row-wise layer normalization with affine parameters. mu / inv_std are
// per-row buffers saved for the backward pass.
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mu, double* inv_std,
                     std::size_t rows, std::size_t cols, double eps);
void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* dy, const double* mu,
                              const double* inv_std, double* dx,
                              double* dgamma, double* dbeta,
                              std::size_t rows, std::size_t cols);

}  // namespace serial

// Parallel-dispatched versions; identical signatures and bit-identical output.
void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);
void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);
void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

void vadd(const double* a, const double* b, double* out, std::size_t n);
void vsub(const double* a, const double* b, double* out, std::size_t n);
void vmul(const double* a, const double* b, double* out, std::size_t n);
void vadd_scalar(const double* a, double s, double* out, std::size_t n);
void vmul_scalar(const double* a, double s, double* out, std::size_t n);
void vrelu(const double* x, double* out, std::size_t n);
void vsigmoid(const double* x, double* out, std::size_t n);

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void softmax_backward_rows(const double* y, const double* dy, double* dx,
                           std::size_t rows, std::size_t cols);

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mu, double* inv_std,
                     std::size_t rows, std::size_t cols, double eps);
void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* dy, const double* mu,
                              const double* inv_std, double* dx,
                              double* dgamma, double* dbeta,
                              std::size_t rows, std::size_t cols);

bool openmp_enabled();
int max_threads();
void set_threads(int n);  // no-op without OpenMP

double stable_sigmoid(double x);

}  // namespace longrisk::kernels
