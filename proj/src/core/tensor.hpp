// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace codemae::numcore {

enum class DType { f32, f64 };

// Error taxonomy shared by the whole library. The C API maps kinds to codes.
enum class ErrorKind { shape, numeric, contract, io, usage };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

struct TensorImpl;
using NodeRef = std::shared_ptr<TensorImpl>;

// Dense row-major tensor with an optional grad slot and reverse-mode tape.
// Values are held as doubles; f32 tensors round every op result to float
// precision so 32-bit runs are bit-reproducible while kernels accumulate
// in double.
struct TensorImpl {
  std::vector<std::size_t> shape;
  DType dtype = DType::f32;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily during backward
  bool requires_grad = false;

  std::vector<NodeRef> parents;
  // Accumulates into parents' grad given this node's grad.
  std::function<void(TensorImpl&)> backprop;
  bool backward_done = false;

  std::size_t size() const { return data.size(); }
  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodeRef impl) : impl_(std::move(impl)) {}

  static Tensor from_data(std::vector<std::size_t> shape,
                          std::vector<double> values, DType dtype = DType::f32,
                          bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, DType dtype = DType::f32,
                      bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value,
                     DType dtype = DType::f32, bool requires_grad = false);
  static Tensor scalar(double value, DType dtype = DType::f32);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  DType dtype() const { return impl_->dtype; }
  std::size_t size() const { return impl_->size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& mutable_data() { return impl_->data; }
  const std::vector<double>& grad() const;
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  void zero_grad();

  double item() const;
  double at(std::size_t flat) const { return impl_->data.at(flat); }

  NodeRef node() const { return impl_; }
  TensorImpl* raw() const { return impl_.get(); }

  // Copy of values with no tape history.
  Tensor detached() const;
  Tensor to_dtype(DType d) const;

 private:
  NodeRef impl_;
};

// Rounds values to f32 precision when dtype is f32.
void apply_dtype(std::vector<double>& v, DType d);
DType promote(DType a, DType b);

// Throws ErrorKind::numeric when any value is non-finite.
void check_finite(const Tensor& t, const char* op_name);

// ---- Forward ops (all record the tape when an input requires grad) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// mat [R×C] + vec [C], broadcast over rows (bias add).
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor gelu(const Tensor& a);  // tanh approximation
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar

// Softmax over the last axis (rows of a matrix, or a whole vector).
Tensor softmax(const Tensor& a);
// Per-row layer norm over the last axis; gamma/beta have extent D.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);
// Per-row division by max(l2 norm, eps_norm) over the last axis.
Tensor l2_normalize(const Tensor& x, double eps_norm = 1e-12);

Tensor gather_rows(const Tensor& mat, const std::vector<std::size_t>& idx);
// Builds an output of rows.size() rows: source[i] >= 0 picks row source[i]
// of mat, source[i] == -1 inserts fill (a [D] vector, e.g. a mask token).
Tensor assemble_rows(const Tensor& mat, const Tensor& fill,
                     const std::vector<long>& source);
Tensor slice_cols(const Tensor& mat, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);  // each [D] -> [N×D]
Tensor mean_rows(const Tensor& mat);                 // [R×C] -> [C]
Tensor diagonal(const Tensor& mat);                  // [N×N] -> [N]
Tensor logsumexp_rows(const Tensor& mat);            // [R×C] -> [R]
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);

// ---- Backward ----

// Reverse-mode sweep from a scalar loss. A second call on the same graph
// without rebuilding it is an error.
void backward(const Tensor& loss);

// Central finite differences against the analytic gradient of f at xs.
// Returns the max over all coordinates of |a-n| / max(|a|,|n|,1e-8).
// All inputs must be f64 leaves with requires_grad set.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> xs, double eps = 1e-5);

namespace test_hooks {
// Fault injection for gradcheck mutation tests: flips the sign of the gelu
// gradient when set (also honored via CODEMAE_TEST_FLIP_GELU_GRAD=1).
extern bool flip_gelu_grad;
}  // namespace test_hooks

}  // namespace codemae::numcore
