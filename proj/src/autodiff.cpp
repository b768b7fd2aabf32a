#include "longrisk/autodiff.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "longrisk/kernels.hpp"

namespace longrisk::ops {

namespace {
thread_local bool g_no_grad = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backprop) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = name;
  bool rg = false;
  if (!g_no_grad) {
    for (const auto& in : inputs) rg = rg || in.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) {
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node_ptr());
    n->backprop = std::move(backprop);
  }
  return Tensor::wrap(std::move(n));
}

void accum(TensorNode& p, const double* g, std::size_t n) {
  auto& grad = p.ensure_grad();
  for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
}

void accum_scaled(TensorNode& p, const double* g, double s, std::size_t n) {
  auto& grad = p.ensure_grad();
  for (std::size_t i = 0; i < n; ++i) grad[i] += s * g[i];
}

void require_rank2(const Tensor& t, const char* op, const char* arg) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": " + arg + " must be rank 2, got " +
                     shape_str(t.shape()));
  }
}

[[noreturn]] void matmul_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": inner dimensions do not match for " +
                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

bool is_scalar(const Tensor& t) { return t.size() == 1; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul", "a");
  require_rank2(b, "matmul", "b");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[0] != k) matmul_mismatch("matmul", a, b);
  const std::size_t n = b.shape()[1];
  std::vector<double> out(m * n);
  kernels::mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, k, n](TensorNode& self) {
                   if (pa->requires_grad) {
                     std::vector<double> da(m * k);
                     kernels::mm_nt(self.grad.data(), pb->data.data(), da.data(), m, n, k);
                     accum(*pa, da.data(), da.size());
                   }
                   if (pb->requires_grad) {
                     std::vector<double> db(k * n);
                     kernels::mm_tn(pa->data.data(), self.grad.data(), db.data(), k, m, n);
                     accum(*pb, db.data(), db.size());
                   }
                 });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt", "a");
  require_rank2(b, "matmul_nt", "b");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[1] != k) matmul_mismatch("matmul_nt", a, b);
  const std::size_t n = b.shape()[0];
  std::vector<double> out(m * n);
  kernels::mm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_op("matmul_nt", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, k, n](TensorNode& self) {
                   if (pa->requires_grad) {
                     std::vector<double> da(m * k);
                     kernels::mm_nn(self.grad.data(), pb->data.data(), da.data(), m, n, k);
                     accum(*pa, da.data(), da.size());
                   }
                   if (pb->requires_grad) {
                     std::vector<double> db(n * k);
                     kernels::mm_tn(self.grad.data(), pa->data.data(), db.data(), n, m, k);
                     accum(*pb, db.data(), db.size());
                   }
                 });
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_tn", "a");
  require_rank2(b, "matmul_tn", "b");
  const std::size_t k = a.shape()[0], m = a.shape()[1];
  if (b.shape()[0] != k) matmul_mismatch("matmul_tn", a, b);
  const std::size_t n = b.shape()[1];
  std::vector<double> out(m * n);
  kernels::mm_tn(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_op("matmul_tn", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, k, n](TensorNode& self) {
                   if (pa->requires_grad) {
                     // dA[k x m] = B[k x n] * dC[m x n]^T
                     std::vector<double> da(k * m);
                     kernels::mm_nt(pb->data.data(), self.grad.data(), da.data(), k, n, m);
                     accum(*pa, da.data(), da.size());
                   }
                   if (pb->requires_grad) {
                     std::vector<double> db(k * n);
                     kernels::mm_nn(pa->data.data(), self.grad.data(), db.data(), k, m, n);
                     accum(*pb, db.data(), db.size());
                   }
                 });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank2(a, "matvec", "a");
  if (x.rank() != 1) {
    throw ShapeError("matvec: x must be rank 1, got " + shape_str(x.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  if (x.shape()[0] != k) matmul_mismatch("matvec", a, x);
  std::vector<double> out(m);
  kernels::mm_nn(a.data().data(), x.data().data(), out.data(), m, k, 1);
  auto pa = a.node_ptr(), px = x.node_ptr();
  return make_op("matvec", {m}, std::move(out), {a, x},
                 [pa, px, m, k](TensorNode& self) {
                   if (pa->requires_grad) {
                     auto& ga = pa->ensure_grad();
                     for (std::size_t i = 0; i < m; ++i) {
                       const double gi = self.grad[i];
                       for (std::size_t j = 0; j < k; ++j)
                         ga[i * k + j] += gi * px->data[j];
                     }
                   }
                   if (px->requires_grad) {
                     std::vector<double> dx(k);
                     kernels::mm_tn(pa->data.data(), self.grad.data(), dx.data(), k, m, 1);
                     accum(*px, dx.data(), k);
                   }
                 });
}

namespace {

enum class EwKind { add, sub, mul };

Tensor elementwise_binary(const char* name, EwKind kind, const Tensor& a,
                          const Tensor& b) {
  const bool a_scalar = is_scalar(a), b_scalar = is_scalar(b);
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": incompatible shapes " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const Tensor& big = b_scalar ? a : b;
  const std::size_t n = big.size();
  std::vector<double> out(n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  switch (kind) {
    case EwKind::add:
      if (a_scalar && !b_scalar) kernels::vadd_scalar(bd, ad[0], out.data(), n);
      else if (b_scalar && !a_scalar) kernels::vadd_scalar(ad, bd[0], out.data(), n);
      else kernels::vadd(ad, bd, out.data(), n);
      break;
    case EwKind::sub:
      if (b_scalar && !a_scalar) {
        kernels::vadd_scalar(ad, -bd[0], out.data(), n);
      } else if (a_scalar && !b_scalar) {
        for (std::size_t i = 0; i < n; ++i) out[i] = ad[0] - bd[i];
      } else {
        kernels::vsub(ad, bd, out.data(), n);
      }
      break;
    case EwKind::mul:
      if (a_scalar && !b_scalar) kernels::vmul_scalar(bd, ad[0], out.data(), n);
      else if (b_scalar && !a_scalar) kernels::vmul_scalar(ad, bd[0], out.data(), n);
      else kernels::vmul(ad, bd, out.data(), n);
      break;
  }
  auto pa = a.node_ptr(), pb = b.node_ptr();
  return make_op(
      name, big.shape(), std::move(out), {a, b},
      [pa, pb, kind, a_scalar, b_scalar, n](TensorNode& self) {
        const double* g = self.grad.data();
        auto reduce_scalar = [&](TensorNode& p, auto weight) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += g[i] * weight(i);
          auto& gr = p.ensure_grad();
          gr[0] += acc;
        };
        auto spread = [&](TensorNode& p, auto weight) {
          auto& gr = p.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) gr[i] += g[i] * weight(i);
        };
        const double* ad = pa->data.data();
        const double* bd = pb->data.data();
        auto wa = [&](std::size_t i) {  // dout/da
          switch (kind) {
            case EwKind::add: return 1.0;
            case EwKind::sub: return 1.0;
            case EwKind::mul: return b_scalar ? bd[0] : bd[i];
          }
          return 0.0;
        };
        auto wb = [&](std::size_t i) {  // dout/db
          switch (kind) {
            case EwKind::add: return 1.0;
            case EwKind::sub: return -1.0;
            case EwKind::mul: return a_scalar ? ad[0] : ad[i];
          }
          return 0.0;
        };
        if (pa->requires_grad) {
          if (a_scalar && n > 1) reduce_scalar(*pa, wa);
          else spread(*pa, wa);
        }
        if (pb->requires_grad) {
          if (b_scalar && n > 1) reduce_scalar(*pb, wb);
          else spread(*pb, wb);
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary("add", EwKind::add, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary("sub", EwKind::sub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary("mul", EwKind::mul, a, b);
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  kernels::vmul_scalar(x.data().data(), c, out.data(), x.size());
  auto px = x.node_ptr();
  return make_op("scale", x.shape(), std::move(out), {x},
                 [px, c](TensorNode& self) {
                   if (px->requires_grad)
                     accum_scaled(*px, self.grad.data(), c, self.grad.size());
                 });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank2(m, "add_rowvec", "m");
  if (v.rank() != 1 || v.shape()[0] != m.shape()[1]) {
    throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) +
                     " does not match matrix " + shape_str(m.shape()));
  }
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  std::vector<double> out(rows * cols);
  const double* md = m.data().data();
  const double* vd = v.data().data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = md[i * cols + j] + vd[j];
  auto pm = m.node_ptr(), pv = v.node_ptr();
  return make_op("add_rowvec", m.shape(), std::move(out), {m, v},
                 [pm, pv, rows, cols](TensorNode& self) {
                   if (pm->requires_grad)
                     accum(*pm, self.grad.data(), rows * cols);
                   if (pv->requires_grad) {
                     auto& gv = pv->ensure_grad();
                     for (std::size_t i = 0; i < rows; ++i)
                       for (std::size_t j = 0; j < cols; ++j)
                         gv[j] += self.grad[i * cols + j];
                   }
                 });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  kernels::vrelu(x.data().data(), out.data(), x.size());
  auto px = x.node_ptr();
  return make_op("relu", x.shape(), std::move(out), {x},
                 [px](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     if (px->data[i] > 0.0) g[i] += self.grad[i];
                 });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  kernels::vsigmoid(x.data().data(), out.data(), x.size());
  auto px = x.node_ptr();
  // closure reads the saved activation from self.data
  return make_op("sigmoid", x.shape(), std::move(out), {x},
                 [px](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                     const double y = self.data[i];
                     g[i] += self.grad[i] * y * (1.0 - y);
                   }
                 });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout probability must be in [0, 1), got " +
                      std::to_string(p));
  }
  if (!train || p == 0.0) return x;  // identity, same handle
  const std::size_t n = x.size();
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(n);
  std::vector<double> out(n);
  const double* xd = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const bool keep = rng.uniform() >= p;
    mask[i] = keep ? keep_scale : 0.0;
    out[i] = xd[i] * mask[i];
  }
  auto px = x.node_ptr();
  return make_op("dropout", x.shape(), std::move(out), {x},
                 [px, mask = std::move(mask)](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     g[i] += self.grad[i] * mask[i];
                 });
}

namespace {

struct LaneView {
  std::size_t outer, len, inner;
};

LaneView lanes_for_axis(const Shape& shape, std::size_t axis) {
  LaneView lv{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) lv.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) lv.inner *= shape[i];
  return lv;
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ContractError("softmax: axis " + std::to_string(axis) +
                        " out of range for rank " + std::to_string(x.rank()));
  }
  const auto lv = lanes_for_axis(x.shape(), axis);
  const double* xd = x.data().data();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  // all-masked lanes are a caller error; scan before computing
  for (std::size_t o = 0; o < lv.outer; ++o) {
    for (std::size_t i = 0; i < lv.inner; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < lv.len && !any; ++j)
        any = xd[(o * lv.len + j) * lv.inner + i] != neg_inf;
      if (!any) {
        throw InvalidMaskError("softmax: every position along axis " +
                               std::to_string(axis) + " is masked");
      }
    }
  }
  std::vector<double> out(x.size());
  if (lv.inner == 1) {
    kernels::softmax_rows(xd, out.data(), lv.outer, lv.len);
  } else {
    for (std::size_t o = 0; o < lv.outer; ++o) {
      for (std::size_t i = 0; i < lv.inner; ++i) {
        double mx = neg_inf;
        for (std::size_t j = 0; j < lv.len; ++j) {
          const double v = xd[(o * lv.len + j) * lv.inner + i];
          mx = v > mx ? v : mx;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < lv.len; ++j) {
          const std::size_t idx = (o * lv.len + j) * lv.inner + i;
          out[idx] = std::exp(xd[idx] - mx);
          s += out[idx];
        }
        const double invs = 1.0 / s;
        for (std::size_t j = 0; j < lv.len; ++j)
          out[(o * lv.len + j) * lv.inner + i] *= invs;
      }
    }
  }
  auto px = x.node_ptr();
  return make_op("softmax", x.shape(), std::move(out), {x},
                 [px, lv](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   if (lv.inner == 1) {
                     std::vector<double> dx(self.data.size());
                     kernels::softmax_backward_rows(self.data.data(), self.grad.data(),
                                                    dx.data(), lv.outer, lv.len);
                     for (std::size_t i = 0; i < dx.size(); ++i) g[i] += dx[i];
                     return;
                   }
                   for (std::size_t o = 0; o < lv.outer; ++o) {
                     for (std::size_t i = 0; i < lv.inner; ++i) {
                       double dot = 0.0;
                       for (std::size_t j = 0; j < lv.len; ++j) {
                         const std::size_t idx = (o * lv.len + j) * lv.inner + i;
                         dot += self.grad[idx] * self.data[idx];
                       }
                       for (std::size_t j = 0; j < lv.len; ++j) {
                         const std::size_t idx = (o * lv.len + j) * lv.inner + i;
                         g[idx] += self.data[idx] * (self.grad[idx] - dot);
                       }
                     }
                   }
                 });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto px = x.node_ptr();
  return make_op("sum", {1}, {acc}, {x}, [px](TensorNode& self) {
    if (!px->requires_grad) return;
    auto& g = px->ensure_grad();
    const double s = self.grad[0];
    for (auto& v : g) v += s;
  });
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  acc *= inv;
  auto px = x.node_ptr();
  return make_op("mean", {1}, {acc}, {x}, [px, inv](TensorNode& self) {
    if (!px->requires_grad) return;
    auto& g = px->ensure_grad();
    const double s = self.grad[0] * inv;
    for (auto& v : g) v += s;
  });
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows", "x");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  const double inv = 1.0 / static_cast<double>(rows);
  std::vector<double> out(cols, 0.0);
  const double* xd = x.data().data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += xd[i * cols + j];
  for (auto& v : out) v *= inv;
  auto px = x.node_ptr();
  return make_op("mean_rows", {cols}, std::move(out), {x},
                 [px, rows, cols, inv](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t i = 0; i < rows; ++i)
                     for (std::size_t j = 0; j < cols; ++j)
                       g[i * cols + j] += self.grad[j] * inv;
                 });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows given");
  const std::size_t cols = rows[0].size();
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != cols) {
      throw ShapeError("stack_rows: rows must be rank-1 of equal length");
    }
  }
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    auto d = r.data();
    out.insert(out.end(), d.begin(), d.end());
  }
  std::vector<NodePtr> parents;
  parents.reserve(rows.size());
  for (const auto& r : rows) parents.push_back(r.node_ptr());
  return make_op("stack_rows", {rows.size(), cols}, std::move(out), rows,
                 [parents = std::move(parents), cols](TensorNode& self) {
                   for (std::size_t i = 0; i < parents.size(); ++i) {
                     if (!parents[i]->requires_grad) continue;
                     accum(*parents[i], self.grad.data() + i * cols, cols);
                   }
                 });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank2(x, "slice_cols", "x");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (start + len > cols) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for " +
                     shape_str(x.shape()));
  }
  std::vector<double> out(rows * len);
  const double* xd = x.data().data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < len; ++j) out[i * len + j] = xd[i * cols + start + j];
  auto px = x.node_ptr();
  return make_op("slice_cols", {rows, len}, std::move(out), {x},
                 [px, rows, cols, start, len](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t i = 0; i < rows; ++i)
                     for (std::size_t j = 0; j < len; ++j)
                       g[i * cols + start + j] += self.grad[i * len + j];
                 });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts given");
  const std::size_t rows = parts[0].shape()[0];
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols", "part");
    if (p.shape()[0] != rows) {
      throw ShapeError("concat_cols: row counts differ");
    }
    total += p.shape()[1];
  }
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.shape()[1];
    const double* pd = p.data().data();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * total + off + j] = pd[i * pc + j];
    off += pc;
  }
  std::vector<NodePtr> parents;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    parents.push_back(p.node_ptr());
    widths.push_back(p.shape()[1]);
  }
  return make_op("concat_cols", {rows, total}, std::move(out), parts,
                 [parents = std::move(parents), widths = std::move(widths), rows,
                  total](TensorNode& self) {
                   std::size_t off = 0;
                   for (std::size_t pi = 0; pi < parents.size(); ++pi) {
                     const std::size_t pc = widths[pi];
                     if (parents[pi]->requires_grad) {
                       auto& g = parents[pi]->ensure_grad();
                       for (std::size_t i = 0; i < rows; ++i)
                         for (std::size_t j = 0; j < pc; ++j)
                           g[i * pc + j] += self.grad[i * total + off + j];
                     }
                     off += pc;
                   }
                 });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto px = x.node_ptr();
  return make_op("reshape", std::move(shape), std::move(out), {x},
                 [px](TensorNode& self) {
                   if (px->requires_grad) accum(*px, self.grad.data(), self.grad.size());
                 });
}

Tensor cumsum_last(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("cumsum_last: empty tensor");
  const std::size_t len = x.shape().back();
  const std::size_t outer = x.size() / len;
  std::vector<double> out(x.size());
  const double* xd = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      acc += xd[o * len + j];
      out[o * len + j] = acc;
    }
  }
  auto px = x.node_ptr();
  return make_op("cumsum_last", x.shape(), std::move(out), {x},
                 [px, outer, len](TensorNode& self) {
                   if (!px->requires_grad) return;
                   auto& g = px->ensure_grad();
                   for (std::size_t o = 0; o < outer; ++o) {
                     double acc = 0.0;
                     for (std::size_t j = len; j-- > 0;) {
                       acc += self.grad[o * len + j];
                       g[o * len + j] += acc;
                     }
                   }
                 });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_rank2(x, "layer_norm", "x");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (gamma.size() != cols || beta.size() != cols) {
    throw ShapeError("layer_norm: gamma/beta must have width " +
                     std::to_string(cols));
  }
  std::vector<double> out(rows * cols);
  auto mu = std::make_shared<std::vector<double>>(rows);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm_rows(x.data().data(), gamma.data().data(),
                           beta.data().data(), out.data(), mu->data(),
                           inv_std->data(), rows, cols, eps);
  auto px = x.node_ptr(), pg = gamma.node_ptr(), pb = beta.node_ptr();
  return make_op("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                 [px, pg, pb, mu, inv_std, rows, cols](TensorNode& self) {
                   std::vector<double> dx(rows * cols), dgamma(cols), dbeta(cols);
                   kernels::layer_norm_backward_rows(
                       px->data.data(), pg->data.data(), self.grad.data(),
                       mu->data(), inv_std->data(), dx.data(), dgamma.data(),
                       dbeta.data(), rows, cols);
                   if (px->requires_grad) accum(*px, dx.data(), dx.size());
                   if (pg->requires_grad) accum(*pg, dgamma.data(), cols);
                   if (pb->requires_grad) accum(*pb, dbeta.data(), cols);
                 });
}

Tensor bce_logits(const Tensor& z, const std::vector<double>& targets) {
  if (z.size() != targets.size()) {
    throw ShapeError("bce_logits: " + std::to_string(targets.size()) +
                     " targets for tensor " + shape_str(z.shape()));
  }
  const std::size_t n = z.size();
  std::vector<double> out(n);
  const double* zd = z.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = zd[i];
    // softplus(z) - y z, computed on whichever side keeps exp() small
    const double sp = zi > 0.0 ? zi + std::log1p(std::exp(-zi))
                               : std::log1p(std::exp(zi));
    out[i] = sp - targets[i] * zi;
  }
  auto pz = z.node_ptr();
  return make_op("bce_logits", z.shape(), std::move(out), {z},
                 [pz, targets](TensorNode& self) {
                   if (!pz->requires_grad) return;
                   auto& g = pz->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                     const double s = kernels::stable_sigmoid(pz->data[i]);
                     g[i] += self.grad[i] * (s - targets[i]);
                   }
                 });
}

}  // namespace longrisk::ops
