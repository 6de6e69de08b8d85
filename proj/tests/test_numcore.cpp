// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace codemae;
using namespace codemae::numcore;

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng,
                   DType dtype = DType::f64) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return Tensor::from_data(std::move(shape), std::move(v), dtype);
}

}  // namespace

TEST_CASE("matmul identity and annihilating product") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c.at(i) == a.at(i));

  Tensor l = Tensor::from_data({2, 2}, {1, 0, 0, 0});
  Tensor r = Tensor::from_data({2, 2}, {0, 0, 0, 1});
  Tensor z = matmul(l, r);
  for (std::size_t i = 0; i < 4; ++i) CHECK(z.at(i) == 0.0);
}

TEST_CASE("matmul shape mismatch raises dimension error") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), Error);
}

TEST_CASE("matmul gradient vs finite differences") {
  Rng rng(7);
  Tensor a = rand_tensor({4, 5}, rng);
  Tensor b = rand_tensor({5, 3}, rng);
  double err = grad_check(
      [](const std::vector<Tensor>& xs) { return sum(matmul(xs[0], xs[1])); },
      {a, b});
  CHECK(err < 1e-4);
  // weighted output to exercise both gradient rules with non-uniform dC
  Tensor w = rand_tensor({4, 3}, rng);
  err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(matmul(xs[0], xs[1]), w));
      },
      {a, b});
  CHECK(err < 1e-4);
}

TEST_CASE("matmul associativity with identity on random chains") {
  Rng rng(11);
  for (int t = 0; t < 3; ++t) {
    Tensor a = rand_tensor({8, 8}, rng);
    Tensor b = rand_tensor({8, 8}, rng);
    Tensor c = rand_tensor({8, 8}, rng);
    Tensor lhs = matmul(matmul(a, b), c);
    Tensor rhs = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::fabs(lhs.at(i) - rhs.at(i)) < 1e-12 * 64);
  }
}

TEST_CASE("softmax uniform and overflow stability") {
  Tensor u = softmax(Tensor::from_data({3}, {0, 0, 0}));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(u.at(i) == doctest::Approx(1.0 / 3.0));

  Tensor big = softmax(Tensor::from_data({2}, {1000, 0}, DType::f64));
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to one, outputs in [0,1]") {
  Rng rng(3);
  Tensor x = rand_tensor({5, 7}, rng);
  Tensor y = softmax(x);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      double v = y.at(i * 7 + j);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax gradient vs finite differences") {
  Rng rng(5);
  Tensor x = rand_tensor({6}, rng);
  Tensor w = rand_tensor({6}, rng);
  double err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(softmax(xs[0]), w));
      },
      {x});
  CHECK(err < 1e-4);
}

TEST_CASE("layer_norm zero variance and identity cases") {
  Tensor g = Tensor::full({4}, 1.0);
  Tensor b = Tensor::zeros({4});
  Tensor c = layer_norm(Tensor::full({4}, 3.0), g, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(c.at(i)) < 1e-9);

  Tensor g2 = Tensor::full({2}, 1.0);
  Tensor b2 = Tensor::zeros({2});
  Tensor y = layer_norm(Tensor::from_data({2}, {1, -1}), g2, b2);
  CHECK(y.at(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(y.at(1) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("layer_norm gradient vs finite differences") {
  Rng rng(9);
  Tensor x = rand_tensor({3, 8}, rng);
  Tensor g = rand_tensor({8}, rng);
  Tensor b = rand_tensor({8}, rng);
  Tensor w = rand_tensor({3, 8}, rng);
  double err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(layer_norm(xs[0], xs[1], xs[2]), w));
      },
      {x, g, b});
  CHECK(err < 1e-4);
}

TEST_CASE("elementwise basics") {
  Tensor v = l2_normalize(Tensor::from_data({2}, {3, 4}));
  CHECK(v.at(0) == doctest::Approx(0.6));
  CHECK(v.at(1) == doctest::Approx(0.8));
  CHECK(mean(Tensor::zeros({5})).item() == 0.0);
}

TEST_CASE("gelu and l2_normalize gradients vs finite differences") {
  Rng rng(13);
  Tensor x = rand_tensor({10}, rng);
  Tensor w = rand_tensor({10}, rng);
  double err = grad_check(
      [&](const std::vector<Tensor>& xs) { return sum(mul(gelu(xs[0]), w)); },
      {x});
  CHECK(err < 1e-4);
  err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(l2_normalize(xs[0]), w));
      },
      {x});
  CHECK(err < 1e-4);
}

TEST_CASE("backward: sum and squared norm rules") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, DType::f64, true);
  backward(sum(x));
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);

  Tensor y = Tensor::from_data({3}, {1, 2, 3}, DType::f64, true);
  backward(sum(square(y)));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(y.grad()[i] == doctest::Approx(2.0 * y.at(i)));
}

TEST_CASE("backward twice without rebuilding is an error") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, DType::f64, true);
  Tensor loss = sum(x);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), Error);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, DType::f64, true);
  Tensor y = square(x);
  CHECK_THROWS_AS(backward(y), Error);
}

TEST_CASE("grad_check trivial cases") {
  Rng rng(17);
  Tensor x = rand_tensor({6}, rng);
  double err = grad_check(
      [](const std::vector<Tensor>& xs) { return sum(xs[0]); }, {x});
  CHECK(err < 1e-10);
  // softmax rows sum to a constant: gradient vanishes up to the
  // finite-difference noise floor
  err = grad_check(
      [](const std::vector<Tensor>& xs) { return sum(softmax(xs[0])); }, {x});
  CHECK(err < 1e-3);
}

TEST_CASE("gradient suite over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 31 + 1);
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4, 2}, rng);
    Tensor w = rand_tensor({3, 2}, rng);
    double err = grad_check(
        [&](const std::vector<Tensor>& xs) {
          return mean(square(mul(matmul(gelu(xs[0]), xs[1]), w)));
        },
        {a, b});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("structural ops round gradients correctly") {
  Rng rng(23);
  Tensor m = rand_tensor({5, 3}, rng);
  Tensor fill = rand_tensor({3}, rng);
  Tensor w = rand_tensor({7, 3}, rng);
  std::vector<long> src{0, -1, 2, 4, -1, 1, 3};
  double err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(assemble_rows(xs[0], xs[1], src), w));
      },
      {m, fill});
  CHECK(err < 1e-4);

  Tensor w2 = rand_tensor({2, 3}, rng);
  err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(gather_rows(xs[0], {1, 4}), w2));
      },
      {m});
  CHECK(err < 1e-4);

  Tensor sq = rand_tensor({4, 4}, rng);
  Tensor wv = rand_tensor({4}, rng);
  err = grad_check(
      [&](const std::vector<Tensor>& xs) {
        return sum(mul(sub(logsumexp_rows(xs[0]), diagonal(xs[0])), wv));
      },
      {sq});
  CHECK(err < 1e-4);
}

TEST_CASE("f32 tensors round to float precision per op") {
  Tensor a = Tensor::from_data({1}, {1.0}, DType::f32);
  Tensor b = Tensor::from_data({1}, {1e-9}, DType::f32);
  Tensor c = add(a, b);
  CHECK(c.at(0) == 1.0);  // absorbed at float precision
  Tensor a64 = Tensor::from_data({1}, {1.0}, DType::f64);
  Tensor b64 = Tensor::from_data({1}, {1e-9}, DType::f64);
  CHECK(add(a64, b64).at(0) > 1.0);
}

TEST_CASE("non-finite forward result is an error") {
  Tensor x = Tensor::from_data({1}, {-1.0}, DType::f64);
  CHECK_THROWS_AS(log(x), Error);  // NaN
}
