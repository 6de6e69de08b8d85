// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <unordered_set>

namespace codemae::numcore {

namespace test_hooks {
bool flip_gelu_grad = false;
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) fail(ErrorKind::shape, "zero extent in shape");
    n *= e;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorKind::shape, std::string(op) + ": shape mismatch");
}

bool tracked(const Tensor& t) { return t.requires_grad() || !t.raw()->parents.empty() || t.raw()->backprop; }

bool any_tracked(std::initializer_list<const Tensor*> ts) {
  for (auto* t : ts)
    if (tracked(*t)) return true;
  return false;
}

NodeRef make_node(std::vector<std::size_t> shape, std::vector<double> data,
                  DType dtype) {
  auto n = std::make_shared<TensorImpl>();
  n->shape = std::move(shape);
  n->dtype = dtype;
  apply_dtype(data, dtype);
  n->data = std::move(data);
  return n;
}

Tensor finish(NodeRef node, std::vector<NodeRef> parents,
              std::function<void(TensorImpl&)> backprop, bool track,
              const char* op_name) {
  if (track) {
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
    node->requires_grad = true;
  }
  Tensor t(std::move(node));
  check_finite(t, op_name);
  return t;
}

// Rows-of-last-axis view: [..., D] treated as R rows of length D.
void last_axis(const Tensor& t, std::size_t& rows, std::size_t& d) {
  if (t.rank() == 0) fail(ErrorKind::shape, "op needs rank >= 1");
  d = t.shape().back();
  rows = t.size() / d;
}

}  // namespace

void apply_dtype(std::vector<double>& v, DType d) {
  if (d == DType::f32)
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

DType promote(DType a, DType b) {
  return (a == DType::f64 || b == DType::f64) ? DType::f64 : DType::f32;
}

void check_finite(const Tensor& t, const char* op_name) {
  for (double v : t.data())
    if (!std::isfinite(v))
      fail(ErrorKind::numeric,
           std::string(op_name) + ": non-finite value produced");
}

Tensor Tensor::from_data(std::vector<std::size_t> shape,
                         std::vector<double> values, DType dtype,
                         bool requires_grad) {
  if (shape_numel(shape) != values.size())
    fail(ErrorKind::shape, "from_data: value count does not match shape");
  auto n = make_node(std::move(shape), std::move(values), dtype);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, DType dtype,
                     bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, 0.0), dtype,
                   requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, DType dtype,
                    bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), dtype,
                   requires_grad);
}

Tensor Tensor::scalar(double value, DType dtype) {
  return from_data({1}, {value}, dtype);
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) fail(ErrorKind::contract, "tensor has no grad");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::shape, "item() on non-scalar tensor");
  return impl_->data[0];
}

Tensor Tensor::detached() const {
  return from_data(impl_->shape, impl_->data, impl_->dtype, false);
}

Tensor Tensor::to_dtype(DType d) const {
  auto out = from_data(impl_->shape, impl_->data, d, false);
  out.set_requires_grad(impl_->requires_grad);
  return out;
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  auto node = make_node(a.shape(), std::move(out), promote(a.dtype(), b.dtype()));
  return finish(
      std::move(node), {a.node(), b.node()},
      [](TensorImpl& self) {
        for (auto& p : self.parents) {
          p->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.grad[i];
        }
      },
      any_tracked({&a, &b}), "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  auto node = make_node(a.shape(), std::move(out), promote(a.dtype(), b.dtype()));
  return finish(
      std::move(node), {a.node(), b.node()},
      [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        pa->ensure_grad();
        pb->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          pa->grad[i] += self.grad[i];
          pb->grad[i] -= self.grad[i];
        }
      },
      any_tracked({&a, &b}), "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  auto node = make_node(a.shape(), std::move(out), promote(a.dtype(), b.dtype()));
  return finish(
      std::move(node), {a.node(), b.node()},
      [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        pa->ensure_grad();
        pb->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          pa->grad[i] += self.grad[i] * pb->data[i];
          pb->grad[i] += self.grad[i] * pa->data[i];
        }
      },
      any_tracked({&a, &b}), "mul");
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + s;
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i];
      },
      tracked(a), "add_scalar");
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * s;
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [s](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i] * s;
      },
      tracked(a), "mul_scalar");
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
  if (mat.rank() != 2 || vec.rank() != 1 || mat.dim(1) != vec.dim(0))
    fail(ErrorKind::shape, "add_rowvec: expected [RxC] and [C]");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  std::vector<double> out(mat.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out[i * c + j] = mat.at(i * c + j) + vec.at(j);
  auto node = make_node(mat.shape(), std::move(out),
                        promote(mat.dtype(), vec.dtype()));
  return finish(
      std::move(node), {mat.node(), vec.node()},
      [r, c](TensorImpl& self) {
        auto& pm = self.parents[0];
        auto& pv = self.parents[1];
        pm->ensure_grad();
        pv->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            pm->grad[i * c + j] += self.grad[i * c + j];
            pv->grad[j] += self.grad[i * c + j];
          }
      },
      any_tracked({&mat, &vec}), "add_rowvec");
}

// ---- matmul / transpose ----

namespace {
// c[mxn] += a[mxk] * b[kxn]; accumulation in double regardless of dtype.
void mm_accum(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      double av = a[i * k + t];
      if (av == 0.0) continue;
      const double* brow = b + t * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    fail(ErrorKind::shape, "matmul: both operands must be rank 2");
  if (a.dim(1) != b.dim(0))
    fail(ErrorKind::shape, "matmul: inner extents disagree");
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  mm_accum(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto node = make_node({m, n}, std::move(out), promote(a.dtype(), b.dtype()));
  return finish(
      std::move(node), {a.node(), b.node()},
      [m, k, n](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        pa->ensure_grad();
        pb->ensure_grad();
        // dA = dC * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
              acc += self.grad[i * n + j] * pb->data[t * n + j];
            pa->grad[i * k + t] += acc;
          }
        // dB = A^T * dC
        for (std::size_t t = 0; t < k; ++t)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
              acc += pa->data[i * k + t] * self.grad[i * n + j];
            pb->grad[t * n + j] += acc;
          }
      },
      any_tracked({&a, &b}), "matmul");
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) fail(ErrorKind::shape, "transpose: rank 2 required");
  std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.at(i * c + j);
  auto node = make_node({c, r}, std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [r, c](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            p->grad[i * c + j] += self.grad[j * r + i];
      },
      tracked(a), "transpose");
}

// ---- nonlinearities ----

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu_fwd(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  double u = kGeluC * (x + kGeluA * x * x * x);
  double t = std::tanh(u);
  double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_fwd(a.at(i));
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        bool flip = test_hooks::flip_gelu_grad;
        if (const char* e = std::getenv("CODEMAE_TEST_FLIP_GELU_GRAD"))
          if (e[0] == '1') flip = true;
        double sign = flip ? -1.0 : 1.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += sign * self.grad[i] * gelu_grad(p->data[i]);
      },
      tracked(a), "gelu");
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a.at(i));
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          double s = p->data[i] > 0 ? 1.0 : (p->data[i] < 0 ? -1.0 : 0.0);
          p->grad[i] += self.grad[i] * s;
        }
      },
      tracked(a), "abs");
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * a.at(i);
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i] * 2.0 * p->data[i];
      },
      tracked(a), "square");
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.at(i));
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i] * self.data[i];
      },
      tracked(a), "exp");
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.at(i));
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i] / p->data[i];
      },
      tracked(a), "log");
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto node = make_node({1}, {acc}, a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (auto& g : p->grad) g += self.grad[0];
      },
      tracked(a), "sum");
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  double n = static_cast<double>(a.size());
  auto node = make_node({1}, {acc / n}, a.dtype());
  return finish(
      std::move(node), {a.node()},
      [n](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (auto& g : p->grad) g += self.grad[0] / n;
      },
      tracked(a), "mean");
}

Tensor mean_rows(const Tensor& mat) {
  if (mat.rank() != 2) fail(ErrorKind::shape, "mean_rows: rank 2 required");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  if (r == 0) fail(ErrorKind::shape, "mean_rows: empty token set");
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += mat.at(i * c + j);
  for (auto& v : out) v /= static_cast<double>(r);
  auto node = make_node({c}, std::move(out), mat.dtype());
  return finish(
      std::move(node), {mat.node()},
      [r, c](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            p->grad[i * c + j] += self.grad[j] / static_cast<double>(r);
      },
      tracked(mat), "mean_rows");
}

// ---- row-structured ops ----

Tensor softmax(const Tensor& a) {
  std::size_t rows, d;
  last_axis(a, rows, d);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x = a.data().data() + i * d;
    double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += std::exp(x[j] - mx);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = std::exp(x[j] - mx) / z;
  }
  auto node = make_node(a.shape(), std::move(out), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [rows, d](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
          const double* y = self.data.data() + i * d;
          const double* g = self.grad.data() + i * d;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
          for (std::size_t j = 0; j < d; ++j)
            p->grad[i * d + j] += y[j] * (g[j] - dot);
        }
      },
      tracked(a), "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  std::size_t rows, d;
  last_axis(x, rows, d);
  if (gamma.size() != d || beta.size() != d)
    fail(ErrorKind::shape, "layer_norm: gamma/beta extent mismatch");
  std::vector<double> out(x.size());
  auto norm = std::make_shared<std::vector<double>>(x.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* v = x.data().data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += v[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (v[j] - mu) * (v[j] - mu);
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      double y = (v[j] - mu) * is;
      (*norm)[i * d + j] = y;
      out[i * d + j] = gamma.at(j) * y + beta.at(j);
    }
  }
  auto node =
      make_node(x.shape(), std::move(out),
                promote(x.dtype(), promote(gamma.dtype(), beta.dtype())));
  return finish(
      std::move(node), {x.node(), gamma.node(), beta.node()},
      [rows, d, norm, inv_sigma](TensorImpl& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        px->ensure_grad();
        pg->ensure_grad();
        pb->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
          const double* y = norm->data() + i * d;
          const double* g = self.grad.data() + i * d;
          double is = (*inv_sigma)[i];
          double m1 = 0.0, m2 = 0.0;  // means of gamma*g and gamma*g*y
          for (std::size_t j = 0; j < d; ++j) {
            double gg = pg->data[j] * g[j];
            m1 += gg;
            m2 += gg * y[j];
            pg->grad[j] += g[j] * y[j];
            pb->grad[j] += g[j];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double gg = pg->data[j] * g[j];
            px->grad[i * d + j] += is * (gg - m1 - y[j] * m2);
          }
        }
      },
      any_tracked({&x, &gamma, &beta}), "layer_norm");
}

Tensor l2_normalize(const Tensor& x, double eps_norm) {
  std::size_t rows, d;
  last_axis(x, rows, d);
  std::vector<double> out(x.size());
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* v = x.data().data() + i * d;
    double n2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) n2 += v[j] * v[j];
    double n = std::max(std::sqrt(n2), eps_norm);
    (*norms)[i] = n;
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = v[j] / n;
  }
  auto node = make_node(x.shape(), std::move(out), x.dtype());
  return finish(
      std::move(node), {x.node()},
      [rows, d, norms, eps_norm](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
          const double* y = self.data.data() + i * d;
          const double* g = self.grad.data() + i * d;
          double n = (*norms)[i];
          double true_norm = 0.0;
          for (std::size_t j = 0; j < d; ++j)
            true_norm += p->data[i * d + j] * p->data[i * d + j];
          true_norm = std::sqrt(true_norm);
          if (true_norm <= eps_norm) {
            // Below the clamp the map is linear: y = x / eps_norm.
            for (std::size_t j = 0; j < d; ++j)
              p->grad[i * d + j] += g[j] / eps_norm;
          } else {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
            for (std::size_t j = 0; j < d; ++j)
              p->grad[i * d + j] += (g[j] - y[j] * dot) / n;
          }
        }
      },
      tracked(x), "l2_normalize");
}

Tensor logsumexp_rows(const Tensor& mat) {
  if (mat.rank() != 2) fail(ErrorKind::shape, "logsumexp_rows: rank 2 required");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = mat.data().data() + i * c;
    double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    out[i] = mx + std::log(z);
  }
  auto node = make_node({r}, std::move(out), mat.dtype());
  return finish(
      std::move(node), {mat.node()},
      [r, c](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
          const double* x = p->data.data() + i * c;
          double lse = self.data[i];
          for (std::size_t j = 0; j < c; ++j)
            p->grad[i * c + j] += self.grad[i] * std::exp(x[j] - lse);
        }
      },
      tracked(mat), "logsumexp_rows");
}

Tensor diagonal(const Tensor& mat) {
  if (mat.rank() != 2 || mat.dim(0) != mat.dim(1))
    fail(ErrorKind::shape, "diagonal: square matrix required");
  std::size_t n = mat.dim(0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mat.at(i * n + i);
  auto node = make_node({n}, std::move(out), mat.dtype());
  return finish(
      std::move(node), {mat.node()},
      [n](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          p->grad[i * n + i] += self.grad[i];
      },
      tracked(mat), "diagonal");
}

// ---- structural ops ----

Tensor gather_rows(const Tensor& mat, const std::vector<std::size_t>& idx) {
  if (mat.rank() != 2) fail(ErrorKind::shape, "gather_rows: rank 2 required");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) fail(ErrorKind::shape, "gather_rows: index out of range");
    std::copy_n(mat.data().data() + idx[i] * c, c, out.data() + i * c);
  }
  auto node = make_node({idx.size(), c}, std::move(out), mat.dtype());
  auto idx_copy = idx;
  return finish(
      std::move(node), {mat.node()},
      [idx_copy, c](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < idx_copy.size(); ++i)
          for (std::size_t j = 0; j < c; ++j)
            p->grad[idx_copy[i] * c + j] += self.grad[i * c + j];
      },
      tracked(mat), "gather_rows");
}

Tensor assemble_rows(const Tensor& mat, const Tensor& fill,
                     const std::vector<long>& source) {
  if (mat.rank() != 2 || fill.rank() != 1 || fill.dim(0) != mat.dim(1))
    fail(ErrorKind::shape, "assemble_rows: expected [RxC] and fill [C]");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  std::vector<double> out(source.size() * c);
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] >= 0) {
      if (static_cast<std::size_t>(source[i]) >= r)
        fail(ErrorKind::shape, "assemble_rows: source row out of range");
      std::copy_n(mat.data().data() + source[i] * c, c, out.data() + i * c);
    } else {
      std::copy_n(fill.data().data(), c, out.data() + i * c);
    }
  }
  auto node = make_node({source.size(), c}, std::move(out),
                        promote(mat.dtype(), fill.dtype()));
  auto src = source;
  return finish(
      std::move(node), {mat.node(), fill.node()},
      [src, c](TensorImpl& self) {
        auto& pm = self.parents[0];
        auto& pf = self.parents[1];
        pm->ensure_grad();
        pf->ensure_grad();
        for (std::size_t i = 0; i < src.size(); ++i)
          for (std::size_t j = 0; j < c; ++j) {
            if (src[i] >= 0)
              pm->grad[src[i] * c + j] += self.grad[i * c + j];
            else
              pf->grad[j] += self.grad[i * c + j];
          }
      },
      any_tracked({&mat, &fill}), "assemble_rows");
}

Tensor slice_cols(const Tensor& mat, std::size_t start, std::size_t count) {
  if (mat.rank() != 2) fail(ErrorKind::shape, "slice_cols: rank 2 required");
  std::size_t r = mat.dim(0), c = mat.dim(1);
  if (start + count > c) fail(ErrorKind::shape, "slice_cols: out of range");
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(mat.data().data() + i * c + start, count, out.data() + i * count);
  auto node = make_node({r, count}, std::move(out), mat.dtype());
  return finish(
      std::move(node), {mat.node()},
      [r, c, start, count](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < count; ++j)
            p->grad[i * c + start + j] += self.grad[i * count + j];
      },
      tracked(mat), "slice_cols");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorKind::shape, "concat_cols: no parts");
  std::size_t r = parts[0].dim(0), total = 0;
  DType dt = parts[0].dtype();
  bool track = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != r)
      fail(ErrorKind::shape, "concat_cols: row count mismatch");
    total += p.dim(1);
    dt = promote(dt, p.dtype());
    track = track || tracked(p);
  }
  std::vector<double> out(r * total);
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t w = p.dim(1);
    widths.push_back(w);
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(p.data().data() + i * w, w, out.data() + i * total + off);
    off += w;
  }
  auto node = make_node({r, total}, std::move(out), dt);
  std::vector<NodeRef> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  return finish(
      std::move(node), std::move(parents),
      [r, total, widths](TensorImpl& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = self.parents[k];
          p->ensure_grad();
          std::size_t w = widths[k];
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
              p->grad[i * w + j] += self.grad[i * total + off + j];
          off += w;
        }
      },
      track, "concat_cols");
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) fail(ErrorKind::shape, "stack_rows: no rows");
  std::size_t d = rows[0].size();
  DType dt = rows[0].dtype();
  bool track = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != d)
      fail(ErrorKind::shape, "stack_rows: extent mismatch");
    dt = promote(dt, r.dtype());
    track = track || tracked(r);
  }
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(rows[i].data().data(), d, out.data() + i * d);
  auto node = make_node({rows.size(), d}, std::move(out), dt);
  std::vector<NodeRef> parents;
  for (const auto& r : rows) parents.push_back(r.node());
  return finish(
      std::move(node), std::move(parents),
      [d](TensorImpl& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = self.parents[i];
          p->ensure_grad();
          for (std::size_t j = 0; j < d; ++j)
            p->grad[j] += self.grad[i * d + j];
        }
      },
      track, "stack_rows");
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != a.size())
    fail(ErrorKind::shape, "reshape: element count mismatch");
  auto node = make_node(std::move(shape), a.data(), a.dtype());
  return finish(
      std::move(node), {a.node()},
      [](TensorImpl& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i];
      },
      tracked(a), "reshape");
}

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    fail(ErrorKind::contract, "backward: loss must be a scalar tensor");
  TensorImpl* root = loss.raw();
  if (root->backward_done)
    fail(ErrorKind::contract,
         "backward: already run on this graph; rebuild before calling again");
  root->backward_done = true;

  // Iterative post-order DFS over parents.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next++].get();
      if (visited.insert(p).second && !p->parents.empty())
        stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> xs, double eps) {
  if (eps <= 0) fail(ErrorKind::contract, "grad_check: eps must be positive");
  for (auto& x : xs) {
    if (x.dtype() != DType::f64)
      fail(ErrorKind::contract, "grad_check: inputs must be f64");
    x.set_requires_grad(true);
    x.zero_grad();
  }
  Tensor loss = f(xs);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& x : xs)
    analytic.push_back(x.has_grad() ? x.grad()
                                    : std::vector<double>(x.size(), 0.0));

  double max_rel = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto& x = xs[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      double orig = x.mutable_data()[i];
      x.mutable_data()[i] = orig + eps;
      double fp = f(xs).item();
      x.mutable_data()[i] = orig - eps;
      double fm = f(xs).item();
      x.mutable_data()[i] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[k][i];
      double rel =
          std::fabs(a - numeric) /
          std::max(std::max(std::fabs(a), std::fabs(numeric)), 1e-8);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace codemae::numcore
