// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/objectives.hpp"

using namespace codemae;
using namespace codemae::objectives;
using data::MaskPlan;
using model::DegradationMode;
using numcore::DType;
using numcore::Error;
using numcore::Tensor;

namespace {

MaskPlan plan_for(std::size_t tokens, double ratio, std::uint64_t seed) {
  Rng rng(seed);
  return data::make_mask(tokens, ratio, rng);
}

Tensor rand2(std::size_t r, std::size_t c, Rng& rng, DType dt = DType::f32) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = normal(rng);
  return Tensor::from_data({r, c}, std::move(v), dt);
}

Tensor unit_rows(std::size_t n, std::size_t d, Rng& rng,
                 DType dt = DType::f32) {
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      v[i * d + j] = normal(rng);
      norm += v[i * d + j] * v[i * d + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] /= norm;
  }
  return Tensor::from_data({n, d}, std::move(v), dt);
}

// ---- independent scalar-loop oracles -------------------------------------

double oracle_mae(const Tensor& r, const Tensor& p, const MaskPlan& plan) {
  std::size_t k = r.dim(1);
  double acc = 0.0;
  for (std::size_t idx : plan.masked)
    for (std::size_t j = 0; j < k; ++j) {
      double d = r.at(idx * k + j) - p.at(idx * k + j);
      acc += d * d;
    }
  return acc / static_cast<double>(plan.masked.size() * k);
}

double oracle_okd(const Tensor& t, const Tensor& x, const MaskPlan& plan) {
  double acc = 0.0;
  for (double v : t.data()) (void)v;
  for (std::size_t i = 0; i < t.size(); ++i)
    acc += std::fabs(t.at(i) - x.at(i));
  return acc / static_cast<double>(plan.visible.size());
}

double oracle_ccl(const Tensor& po, const Tensor& ps, double tau) {
  std::size_t n = po.dim(0), d = po.dim(1);
  auto direction = [&](const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          s += a.at(i * d + k) * b.at(j * d + k);
        row[j] = s / tau;
        mx = std::max(mx, row[j]);
      }
      double lse = 0.0;
      for (double v : row) lse += std::exp(v - mx);
      acc += mx + std::log(lse) - row[i];
    }
    return acc / static_cast<double>(n);
  };
  return 0.5 * (direction(ps, po) + direction(po, ps));
}

std::vector<double> oracle_gray(const Tensor& p_rgb, std::size_t patch) {
  std::size_t m = p_rgb.dim(0), p2 = patch * patch;
  std::vector<double> out(m * p2);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = 0; i < p2; ++i)
      out[r * p2 + i] = 0.299 * p_rgb.at(r * 3 * p2 + i) +
                        0.587 * p_rgb.at(r * 3 * p2 + p2 + i) +
                        0.114 * p_rgb.at(r * 3 * p2 + 2 * p2 + i);
  return out;
}

}  // namespace

TEST_CASE("loss_mae: perfect reconstruction is exactly zero") {
  Rng rng(1);
  MaskPlan plan = plan_for(16, 0.5, 2);
  Tensor p_o = rand2(16, 12, rng);
  Tensor p_s = rand2(16, 4, rng);
  Tensor l = loss_mae(p_o, p_s, p_o, p_s, plan);
  CHECK(l.at(0) == 0.0);
}

TEST_CASE("loss_mae: unit error at every masked element gives 2") {
  MaskPlan plan = plan_for(16, 0.5, 3);
  Tensor zero_o = Tensor::zeros({16, 12});
  Tensor zero_s = Tensor::zeros({16, 4});
  Tensor one_o = Tensor::full({16, 12}, 1.0);
  Tensor one_s = Tensor::full({16, 4}, 1.0);
  Tensor l = loss_mae(one_o, one_s, zero_o, zero_s, plan);
  CHECK(l.at(0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("loss_mae: degenerate mask is a contract error") {
  MaskPlan plan;
  plan.token_count = 4;
  plan.m.assign(4, 0);
  plan.visible = {0, 1, 2, 3};
  Tensor x = Tensor::zeros({4, 4});
  CHECK_THROWS_AS(loss_mae(x, x, x, x, plan), Error);
}

TEST_CASE("loss_okd: single-token hand example") {
  MaskPlan plan;
  plan.token_count = 1;
  plan.m = {0};
  plan.visible = {0};
  Tensor t = Tensor::from_data({1, 2}, {0.5, 0.0});
  Tensor x = Tensor::from_data({1, 2}, {-0.5, 0.0});
  CHECK(loss_okd(t, x, plan).at(0) == doctest::Approx(1.0));
}

TEST_CASE("loss_ccl: identical unit rows give log N") {
  for (std::size_t n : {2, 4, 8}) {
    Rng rng(10 + n);
    Tensor one = unit_rows(1, 6, rng);
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i)
      v.insert(v.end(), one.data().begin(), one.data().end());
    Tensor rows = Tensor::from_data({n, 6}, std::move(v));
    Tensor l = loss_ccl(rows, rows, 0.07);
    CHECK(std::fabs(l.at(0) - std::log(static_cast<double>(n))) < 1e-4);
  }
}

TEST_CASE("loss_ccl: N=2 orthogonal positives, tau=0.07") {
  Tensor e = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  double expected = std::log(1.0 + std::exp(-1.0 / 0.07));
  Tensor l = loss_ccl(e, e, 0.07);
  CHECK(l.at(0) == doctest::Approx(expected).epsilon(1e-3));
  CHECK(l.at(0) < 1e-6);
  CHECK(l.at(0) > 0.0);
}

TEST_CASE("loss_ccl: invariant under a joint row permutation") {
  Rng rng(20);
  Tensor po = unit_rows(6, 5, rng, DType::f64);
  Tensor ps = unit_rows(6, 5, rng, DType::f64);
  double base = loss_ccl(po, ps, 0.07).at(0);

  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  auto permute = [&](const Tensor& t) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        v[i * 5 + j] = t.at(perm[i] * 5 + j);
    return Tensor::from_data({6, 5}, std::move(v), DType::f64);
  };
  double permuted = loss_ccl(permute(po), permute(ps), 0.07).at(0);
  CHECK(std::fabs(base - permuted) < 1e-12);
}

TEST_CASE("loss_ccl: loss rises as positives rotate away") {
  double prev = -1.0;
  for (double theta : {0.0, 0.15, 0.3, 0.45, 0.6}) {
    double c = std::cos(theta), s = std::sin(theta);
    Tensor po = Tensor::from_data({2, 2}, {1, 0, 0, 1}, DType::f64);
    Tensor ps = Tensor::from_data({2, 2}, {c, s, -s, c}, DType::f64);
    double l = loss_ccl(po, ps, 0.07).at(0);
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("loss_ccl: contract errors") {
  Tensor ok = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor bad = Tensor::from_data({2, 2}, {2, 0, 0, 1});
  CHECK_THROWS_WITH_AS(loss_ccl(ok, bad, 0.07),
                       doctest::Contains("l2-normalized"), Error);
  Tensor one = Tensor::from_data({1, 2}, {1, 0});
  CHECK_THROWS_WITH_AS(loss_ccl(one, one, 0.07), doctest::Contains("N < 2"),
                       Error);
}

TEST_CASE("degrade: grayscale hand examples") {
  // white patch stays 1.0
  Tensor white = Tensor::full({1, 3 * 4}, 1.0);
  Tensor g = degrade(white, 3, 2, DegradationMode::grayscale);
  CHECK(g.dim(1) == 4);
  for (double v : g.data()) CHECK(v == doctest::Approx(1.0));

  // pure red collapses to 0.299
  std::vector<double> red(3 * 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) red[i] = 1.0;
  Tensor r = degrade(Tensor::from_data({1, 12}, red), 3, 2,
                     DegradationMode::grayscale);
  for (double v : r.data()) CHECK(v == doctest::Approx(0.299));

  // single-channel input passes through and is idempotent
  Rng rng(30);
  Tensor mono = rand2(3, 4, rng);
  Tensor once = degrade(mono, 1, 2, DegradationMode::grayscale);
  CHECK(once.data() == mono.data());
  CHECK_FALSE(once.requires_grad());
  Tensor twice = degrade(once, 1, 2, DegradationMode::grayscale);
  CHECK(twice.data() == once.data());
}

TEST_CASE("degrade: channel-preserving ablation modes") {
  Rng rng(31);
  Tensor p = rand2(2, 3 * 16, rng, DType::f64);
  for (auto mode : {DegradationMode::spatial_median,
                    DegradationMode::spatial_avgpool, DegradationMode::none_rgb}) {
    Tensor d = degrade(p, 3, 4, mode);
    CHECK(d.shape() == p.shape());
    CHECK(degraded_channels(3, mode) == 3);
  }
  // constant patches are fixed points of the spatial filters
  Tensor flat = Tensor::full({1, 3 * 16}, 0.25);
  for (auto mode :
       {DegradationMode::spatial_median, DegradationMode::spatial_avgpool}) {
    Tensor d = degrade(flat, 3, 4, mode);
    for (double v : d.data()) CHECK(v == doctest::Approx(0.25));
  }
  CHECK(degraded_channels(3, DegradationMode::grayscale) == 1);
}

TEST_CASE("degrade: targets never carry gradients") {
  Rng rng(32);
  Tensor leaf = rand2(2, 3 * 16, rng, DType::f64);
  leaf.set_requires_grad(true);
  for (auto mode :
       {DegradationMode::grayscale, DegradationMode::none_rgb,
        DegradationMode::spatial_median, DegradationMode::spatial_avgpool})
    CHECK_FALSE(degrade(leaf, 3, 4, mode).requires_grad());
}

TEST_CASE("loss_cdr: matches a hand-built grayscale oracle") {
  Rng rng(33);
  MaskPlan plan = plan_for(8, 0.5, 34);
  Tensor p_o = rand2(8, 3 * 16, rng, DType::f64);
  Tensor p_s = rand2(8, 16, rng, DType::f64);
  Tensor rcdr_o = rand2(8, 16, rng, DType::f64);
  Tensor rcdr_s = rand2(8, 16, rng, DType::f64);

  Tensor gray_o = Tensor::from_data({8, 16}, oracle_gray(p_o, 4), DType::f64);
  double expect = oracle_mae(rcdr_o, p_s, plan) + oracle_mae(rcdr_s, gray_o, plan);
  Tensor got = loss_cdr(rcdr_o, rcdr_s, p_o, p_s, plan, 4,
                        DegradationMode::grayscale);
  CHECK(got.at(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("scalar oracle equivalence at 32-bit across random instances") {
  for (std::uint64_t inst = 0; inst < 50; ++inst) {
    Rng rng(mix_seed(100, inst));
    MaskPlan plan = plan_for(16, 0.5, mix_seed(101, inst));

    Tensor p_o = rand2(16, 3 * 16, rng);
    Tensor p_s = rand2(16, 16, rng);
    Tensor r_o = rand2(16, 3 * 16, rng);
    Tensor r_s = rand2(16, 16, rng);
    double mae = oracle_mae(r_o, p_o, plan) + oracle_mae(r_s, p_s, plan);
    CHECK(std::fabs(loss_mae(r_o, r_s, p_o, p_s, plan).at(0) - mae) <
          1e-6 * std::max(1.0, std::fabs(mae)));

    Tensor t = rand2(plan.visible_count(), 8, rng);
    Tensor x = rand2(plan.visible_count(), 8, rng);
    double okd = oracle_okd(t, x, plan);
    CHECK(std::fabs(loss_okd(t, x, plan).at(0) - okd) <
          1e-6 * std::max(1.0, std::fabs(okd)));

    Tensor po = unit_rows(4, 6, rng);
    Tensor ps = unit_rows(4, 6, rng);
    double ccl = oracle_ccl(po, ps, 0.07);
    CHECK(std::fabs(loss_ccl(po, ps, 0.07).at(0) - ccl) <
          1e-6 * std::max(1.0, std::fabs(ccl)));

    Tensor rcdr_o = rand2(16, 16, rng);
    Tensor rcdr_s = rand2(16, 16, rng);
    Tensor gray = Tensor::from_data({16, 16}, oracle_gray(p_o, 4));
    double cdr = oracle_mae(rcdr_o, p_s, plan) + oracle_mae(rcdr_s, gray, plan);
    CHECK(std::fabs(loss_cdr(rcdr_o, rcdr_s, p_o, p_s, plan, 4,
                             DegradationMode::grayscale)
                        .at(0) -
                    cdr) < 1e-6 * std::max(1.0, std::fabs(cdr)));
  }
}

TEST_CASE("total_loss: total equals the sum of its columns bit-exactly") {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch = 8;
  mc.width = 16;
  mc.decoder_width = 16;
  mc.heads = 2;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.cdr_depth = 1;
  mc.mlp_ratio = 2;
  model::ModelState m = model::ModelState::init(mc, 40);
  model::TeacherHandle teacher = model::TeacherHandle::frozen_random(mc, 41);

  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(4, 0, 42, sc);
  data::BatchConfig bc;
  bc.batch_size = 3;
  bc.token_count = 16;
  bc.paired_fraction = 1.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 43, 0);

  auto b = total_loss(batch, m, teacher, {});
  float expect = static_cast<float>(b.l_mae.at(0));
  expect = static_cast<float>(expect + b.l_okd.at(0));
  expect = static_cast<float>(expect + b.l_ccl.at(0));
  expect = static_cast<float>(expect + b.l_cdr.at(0));
  CHECK(b.total.at(0) == static_cast<double>(expect));
  CHECK(b.paired);
  CHECK(b.l_mae.at(0) > 0.0);
  CHECK(b.l_ccl.at(0) > 0.0);
  CHECK(b.l_cdr.at(0) > 0.0);
}

TEST_CASE("total_loss: unpaired batches gate CCL and CDR to exact zeros") {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch = 8;
  mc.width = 16;
  mc.decoder_width = 16;
  mc.heads = 2;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.cdr_depth = 1;
  mc.mlp_ratio = 2;
  model::ModelState m = model::ModelState::init(mc, 50);
  model::TeacherHandle teacher = model::TeacherHandle::frozen_random(mc, 51);

  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(0, 8, 52, sc);
  data::BatchConfig bc;
  bc.batch_size = 4;
  bc.token_count = 16;
  bc.paired_fraction = 0.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 53, 0);
  REQUIRE_FALSE(batch.plan.paired);

  auto b = total_loss(batch, m, teacher, {});
  CHECK_FALSE(b.paired);
  CHECK(b.l_ccl.at(0) == 0.0);  // bit-exact, not approximately zero
  CHECK(b.l_cdr.at(0) == 0.0);
  CHECK(b.l_mae.at(0) > 0.0);

  numcore::backward(b.total);
  // the gated branches never entered the graph: CA buffer and CDR decoder
  // parameters must end the step with no gradient at all
  for (const auto& [name, t] : m.named_params()) {
    bool gated = name.rfind("ca.", 0) == 0 || name.rfind("cdr.", 0) == 0;
    if (!gated) continue;
    if (t.has_grad())
      for (double g : t.grad()) CHECK(g == 0.0);
    else
      CHECK_FALSE(t.has_grad());
  }
  // while the shared encoder did train
  bool encoder_live = false;
  for (const auto& [name, t] : m.named_params())
    if (name.rfind("enc.", 0) == 0 && t.has_grad())
      for (double g : t.grad())
        if (g != 0.0) encoder_live = true;
  CHECK(encoder_live);
}

TEST_CASE("total_loss: mixed paired/unpaired batch is rejected") {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch = 8;
  mc.width = 16;
  mc.decoder_width = 16;
  mc.heads = 2;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.cdr_depth = 1;
  mc.mlp_ratio = 2;
  model::ModelState m = model::ModelState::init(mc, 60);
  model::TeacherHandle teacher = model::TeacherHandle::frozen_random(mc, 61);

  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(2, 0, 62, sc);
  data::BatchConfig bc;
  bc.batch_size = 2;
  bc.token_count = 16;
  bc.paired_fraction = 1.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 63, 0);
  batch.samples[1].sar.reset();  // corrupt one sample in a paired batch
  CHECK_THROWS_WITH_AS(total_loss(batch, m, teacher, {}),
                       doctest::Contains("mixed"), Error);
}

TEST_CASE("total_loss: rigid baseline skips the conditioning buffer") {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch = 8;
  mc.width = 16;
  mc.decoder_width = 16;
  mc.heads = 2;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.cdr_depth = 1;
  mc.mlp_ratio = 2;
  model::ModelState m = model::ModelState::init(mc, 70);
  model::TeacherHandle teacher = model::TeacherHandle::frozen_random(mc, 71);

  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(4, 0, 72, sc);
  data::BatchConfig bc;
  bc.batch_size = 3;
  bc.token_count = 16;
  bc.paired_fraction = 1.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 73, 0);

  ObjectiveConfig rigid;
  rigid.rigid_contrastive = true;
  auto b = total_loss(batch, m, teacher, rigid);
  CHECK(b.l_ccl.at(0) > 0.0);
  numcore::backward(b.total);
  for (const auto& [name, t] : m.named_params()) {
    if (name.rfind("ca.", 0) != 0) continue;
    if (t.has_grad())
      for (double g : t.grad()) CHECK(g == 0.0);
  }
}

TEST_CASE("total_loss: disabled terms report exact zeros") {
  model::ModelConfig mc;
  mc.image_size = 32;
  mc.patch = 8;
  mc.width = 16;
  mc.decoder_width = 16;
  mc.heads = 2;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.cdr_depth = 1;
  mc.mlp_ratio = 2;
  model::ModelState m = model::ModelState::init(mc, 80);
  model::TeacherHandle teacher = model::TeacherHandle::frozen_random(mc, 81);

  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(4, 0, 82, sc);
  data::BatchConfig bc;
  bc.batch_size = 2;
  bc.token_count = 16;
  bc.paired_fraction = 1.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 83, 0);

  ObjectiveConfig off;
  off.enable_okd = false;
  off.enable_ccl = false;
  off.enable_cdr = false;
  auto b = total_loss(batch, m, teacher, off);
  CHECK(b.l_okd.at(0) == 0.0);
  CHECK(b.l_ccl.at(0) == 0.0);
  CHECK(b.l_cdr.at(0) == 0.0);
  CHECK(b.total.at(0) == b.l_mae.at(0));
}
