#include "longrisk/kernels.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace longrisk::kernels {

namespace {

// Below this many multiply-adds (or elements) the parallel dispatch runs the
// serial loop inline; the fork/join overhead dominates for tiny shapes.
constexpr std::size_t kMatWorkThreshold = 1u << 16;
constexpr std::size_t kVecWorkThreshold = 1u << 15;

inline void mm_nn_row(const double* a, const double* b, double* c,
                      std::size_t i, std::size_t k, std::size_t n) {
  double* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  const double* arow = a + i * k;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double aik = arow[kk];
    const double* brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

inline void mm_nt_row(const double* a, const double* b, double* c,
                      std::size_t i, std::size_t k, std::size_t n) {
  const double* arow = a + i * k;
  double* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
    crow[j] = acc;
  }
}

inline void mm_tn_col(const double* a, const double* b, double* c,
                      std::size_t i, std::size_t k, std::size_t m,
                      std::size_t n) {
  // c[i, :] for c = a[k x m]^T b[k x n]
  double* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double aki = a[kk * m + i];
    const double* brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
  }
}

inline void softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols; ++j) mx = x[j] > mx ? x[j] : mx;
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    // exp(-inf - mx) == 0 exactly, masked entries never contribute
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void softmax_bwd_row(const double* y, const double* dy, double* dx,
                            std::size_t cols) {
  double dot = 0.0;
  for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < cols; ++j) dx[j] = y[j] * (dy[j] - dot);
}

inline void ln_row(const double* x, const double* gamma, const double* beta,
                   double* y, double* mu, double* inv_std, std::size_t cols,
                   double eps) {
  double m = 0.0;
  for (std::size_t j = 0; j < cols; ++j) m += x[j];
  m /= static_cast<double>(cols);
  double v = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = x[j] - m;
    v += d * d;
  }
  v /= static_cast<double>(cols);
  const double is = 1.0 / std::sqrt(v + eps);
  *mu = m;
  *inv_std = is;
  for (std::size_t j = 0; j < cols; ++j) y[j] = gamma[j] * ((x[j] - m) * is) + beta[j];
}

inline void ln_bwd_row(const double* x, const double* gamma, const double* dy,
                       double mu, double inv_std, double* dx, std::size_t cols) {
  const double n = static_cast<double>(cols);
  double sum_dxhat = 0.0;
  double sum_dxhat_xhat = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xhat = (x[j] - mu) * inv_std;
    const double dxhat = dy[j] * gamma[j];
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * xhat;
  }
  for (std::size_t j = 0; j < cols; ++j) {
    const double xhat = (x[j] - mu) * inv_std;
    const double dxhat = dy[j] * gamma[j];
    dx[j] = (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / n) * inv_std;
  }
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace serial {

void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
}

void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
}

void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) mm_tn_col(a, b, c, i, k, m, n);
}

void vadd(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void vsub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void vmul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void vadd_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}
void vmul_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void vrelu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void vsigmoid(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = stable_sigmoid(x[i]);
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_backward_rows(const double* y, const double* dy, double* dx,
                           std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    softmax_bwd_row(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mu, double* inv_std,
                     std::size_t rows, std::size_t cols, double eps) {
  for (std::size_t r = 0; r < rows; ++r)
    ln_row(x + r * cols, gamma, beta, y + r * cols, mu + r, inv_std + r, cols, eps);
}

void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* dy, const double* mu,
                              const double* inv_std, double* dx,
                              double* dgamma, double* dbeta,
                              std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    dgamma[j] = 0.0;
    dbeta[j] = 0.0;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    const double* dyr = dy + r * cols;
    ln_bwd_row(xr, gamma, dyr, mu[r], inv_std[r], dx + r * cols, cols);
    for (std::size_t j = 0; j < cols; ++j) {
      const double xhat = (xr[j] - mu[r]) * inv_std[r];
      dgamma[j] += dyr[j] * xhat;
      dbeta[j] += dyr[j];
    }
  }
}

}  // namespace serial

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n < kMatWorkThreshold || m < 2) {
    serial::mm_nn(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    mm_nn_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n < kMatWorkThreshold || m < 2) {
    serial::mm_nt(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    mm_nt_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n < kMatWorkThreshold || m < 2) {
    serial::mm_tn(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    mm_tn_col(a, b, c, static_cast<std::size_t>(i), k, m, n);
}

#define LONGRISK_EW_DISPATCH(stmt_serial, loop_body)                        \
  if (n < kVecWorkThreshold) {                                              \
    stmt_serial;                                                            \
    return;                                                                 \
  }                                                                         \
  _Pragma("omp parallel for schedule(static)")                              \
  for (long long i = 0; i < static_cast<long long>(n); ++i) { loop_body; }

void vadd(const double* a, const double* b, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vadd(a, b, out, n), out[i] = a[i] + b[i])
}
void vsub(const double* a, const double* b, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vsub(a, b, out, n), out[i] = a[i] - b[i])
}
void vmul(const double* a, const double* b, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vmul(a, b, out, n), out[i] = a[i] * b[i])
}
void vadd_scalar(const double* a, double s, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vadd_scalar(a, s, out, n), out[i] = a[i] + s)
}
void vmul_scalar(const double* a, double s, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vmul_scalar(a, s, out, n), out[i] = a[i] * s)
}
void vrelu(const double* x, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vrelu(x, out, n), out[i] = x[i] > 0.0 ? x[i] : 0.0)
}
void vsigmoid(const double* x, double* out, std::size_t n) {
  LONGRISK_EW_DISPATCH(serial::vsigmoid(x, out, n), out[i] = stable_sigmoid(x[i]))
}

#undef LONGRISK_EW_DISPATCH

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
  if (rows * cols < kVecWorkThreshold || rows < 2) {
    serial::softmax_rows(x, y, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_backward_rows(const double* y, const double* dy, double* dx,
                           std::size_t rows, std::size_t cols) {
  if (rows * cols < kVecWorkThreshold || rows < 2) {
    serial::softmax_backward_rows(y, dy, dx, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    softmax_bwd_row(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mu, double* inv_std,
                     std::size_t rows, std::size_t cols, double eps) {
  if (rows * cols < kVecWorkThreshold || rows < 2) {
    serial::layer_norm_rows(x, gamma, beta, y, mu, inv_std, rows, cols, eps);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    ln_row(x + r * cols, gamma, beta, y + r * cols, mu + r, inv_std + r, cols, eps);
}

void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* dy, const double* mu,
                              const double* inv_std, double* dx,
                              double* dgamma, double* dbeta,
                              std::size_t rows, std::size_t cols) {
  // dgamma/dbeta accumulate across rows in row order; keep that reduction
  // serial so results stay independent of the thread count.
  serial::layer_norm_backward_rows(x, gamma, dy, mu, inv_std, dx, dgamma,
                                   dbeta, rows, cols);
}

}  // namespace longrisk::kernels
