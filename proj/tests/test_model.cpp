// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "core/container.hpp"
#include "core/model.hpp"
#include "core/objectives.hpp"

using namespace codemae;
using namespace codemae::model;
using data::MaskPlan;
using numcore::DType;
using numcore::Error;
using numcore::Tensor;

namespace {

ModelConfig tiny_config(DType dtype = DType::f32) {
  ModelConfig cfg;
  cfg.image_size = 32;  // M = 16 tokens at p = 8
  cfg.patch = 8;
  cfg.width = 16;
  cfg.decoder_width = 16;
  cfg.heads = 2;
  cfg.encoder_depth = 1;
  cfg.decoder_depth = 1;
  cfg.cdr_depth = 1;
  cfg.mlp_ratio = 2;
  cfg.dtype = dtype;
  return cfg;
}

MaskPlan plan_for(std::size_t tokens, double ratio, std::uint64_t seed) {
  Rng rng(seed);
  return data::make_mask(tokens, ratio, rng);
}

MaskPlan dense_plan(std::size_t tokens) {
  MaskPlan p;
  p.token_count = tokens;
  p.ratio = 0.0;
  p.m.assign(tokens, 0);
  p.visible.resize(tokens);
  for (std::size_t i = 0; i < tokens; ++i) p.visible[i] = i;
  return p;
}

Tensor rand_image(std::size_t channels, std::size_t hw, Rng& rng,
                  DType dtype = DType::f32) {
  std::vector<double> v(channels * hw * hw);
  for (auto& x : v) x = normal(rng);
  return Tensor::from_data({channels, hw, hw}, std::move(v), dtype);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() /
          ("codemae_model_" + name + "_" + std::to_string(::getpid())))
      .string();
}

}  // namespace

TEST_CASE("encode_visible row counts follow the plan") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 1);
  Rng rng(2);
  Tensor img = rand_image(3, 32, rng);

  MaskPlan p = plan_for(16, 0.75, 3);
  Tensor x = encode_visible(m, img, Modality::optical, p);
  CHECK(x.dim(0) == 4);  // 16 tokens, 12 masked
  CHECK(x.dim(1) == 16);

  Tensor dense = encode_visible(m, img, Modality::optical, dense_plan(16));
  CHECK(dense.dim(0) == 16);

  MaskPlan wrong = plan_for(64, 0.75, 3);
  CHECK_THROWS_AS(encode_visible(m, img, Modality::optical, wrong), Error);
}

TEST_CASE("shared plan gathers identical index sets across modalities") {
  MaskPlan p = plan_for(196, 0.75, 9);
  CHECK(p.visible_count() == 49);
  CHECK(p.masked_count() == 147);
  // the plan object itself is shared: both modalities read the same indices
  MaskPlan q = p;
  CHECK(q.visible == p.visible);
  CHECK(q.m == p.m);
}

TEST_CASE("decode_reconstruct output shapes and determinism") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 4);
  Rng rng(5);
  Tensor opt = rand_image(3, 32, rng);
  Tensor sar = rand_image(1, 32, rng);
  MaskPlan p = plan_for(16, 0.5, 6);

  Tensor xo = encode_visible(m, opt, Modality::optical, p);
  Tensor xs = encode_visible(m, sar, Modality::sar, p);
  Tensor ro = decode_reconstruct(m, xo, p, Modality::optical);
  Tensor rs = decode_reconstruct(m, xs, p, Modality::sar);
  CHECK(ro.dim(0) == 16);
  CHECK(ro.dim(1) == 3 * 64);
  CHECK(rs.dim(0) == 16);
  CHECK(rs.dim(1) == 64);

  Tensor ro2 = decode_reconstruct(m, encode_visible(m, opt, Modality::optical, p),
                                  p, Modality::optical);
  CHECK(ro.data() == ro2.data());  // bitwise
}

TEST_CASE("decode_cdr single-channel head and parameter disjointness") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 7);
  Rng rng(8);
  MaskPlan p = plan_for(16, 0.5, 9);
  Tensor xo = encode_visible(m, rand_image(3, 32, rng), Modality::optical, p);
  Tensor xs = encode_visible(m, rand_image(1, 32, rng), Modality::sar, p);

  Tensor co = decode_cdr(m, xo, p);
  Tensor cs = decode_cdr(m, xs, p);
  CHECK(co.dim(1) == 64);  // p^2 regardless of source modality
  CHECK(cs.dim(1) == 64);

  // CDR decoder blocks are separate parameter objects from the main decoder
  for (const auto& cdr_blk : m.cdr_decoder)
    for (const auto& dec_blk : m.decoder)
      CHECK(&cdr_blk.attention.q.weight.data() !=
            &dec_blk.attention.q.weight.data());
}

TEST_CASE("gradient flows from the CDR loss into the encoder") {
  auto cfg = tiny_config(DType::f64);
  ModelState m = ModelState::init(cfg, 10);
  Rng rng(11);
  Tensor opt = rand_image(3, 32, rng, DType::f64);
  Tensor sar = rand_image(1, 32, rng, DType::f64);
  MaskPlan p = plan_for(16, 0.5, 12);

  Tensor xo = encode_visible(m, opt, Modality::optical, p);
  Tensor xs = encode_visible(m, sar, Modality::sar, p);
  Tensor rcdr_o = decode_cdr(m, xo, p);
  Tensor rcdr_s = decode_cdr(m, xs, p);
  Tensor loss = objectives::loss_cdr(rcdr_o, rcdr_s, nn::patchify(opt, 8),
                                     nn::patchify(sar, 8), p, 8,
                                     DegradationMode::grayscale);
  // check a representative encoder parameter receives nonzero gradient
  numcore::backward(loss);
  const Tensor& enc_w = m.encoder[0].attention.q.weight;
  REQUIRE(enc_w.has_grad());
  double mag = 0;
  for (double g : enc_w.grad()) mag += std::fabs(g);
  CHECK(mag > 0.0);
}

TEST_CASE("condition: zero value projection is the identity") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 13);
  std::fill(const_cast<Tensor&>(m.ca.wv).mutable_data().begin(),
            const_cast<Tensor&>(m.ca.wv).mutable_data().end(), 0.0);
  Rng rng(14);
  Tensor xo = Tensor::from_data({4, 16}, [&] {
    std::vector<double> v(64);
    for (auto& x : v) x = normal(rng);
    return v;
  }());
  Tensor xs = Tensor::from_data({4, 16}, [&] {
    std::vector<double> v(64);
    for (auto& x : v) x = normal(rng);
    return v;
  }());
  auto [co, cs] = condition(m, xo, xs);
  CHECK(co.data() == xo.data());
  CHECK(cs.data() == xs.data());
}

TEST_CASE("condition: symmetric inputs give symmetric outputs") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 15);
  Rng rng(16);
  std::vector<double> v(4 * 16);
  for (auto& x : v) x = normal(rng);
  Tensor x = Tensor::from_data({4, 16}, v);
  auto [a, b] = condition(m, x, x);
  CHECK(a.data() == b.data());
}

TEST_CASE("condition gradient check through both directions") {
  auto cfg = tiny_config(DType::f64);
  cfg.width = 6;
  cfg.decoder_width = 6;
  ModelState m = ModelState::init(cfg, 17);
  Rng rng(18);
  auto mk = [&rng](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = normal(rng);
    return Tensor::from_data({r, c}, std::move(v), DType::f64);
  };
  double err = numcore::grad_check(
      [&m](const std::vector<Tensor>& xs) {
        nn::CaBufferParams ca;
        ca.wq = xs[2];
        ca.wk = xs[3];
        ca.wv = xs[4];
        Tensor a = nn::cross_attention(xs[0], xs[1], ca);
        Tensor b = nn::cross_attention(xs[1], xs[0], ca);
        return numcore::add(numcore::sum(a), numcore::sum(b));
      },
      {mk(3, 6), mk(3, 6), mk(6, 6), mk(6, 6), mk(6, 6)});
  CHECK(err < 1e-4);
}

TEST_CASE("global_pool examples") {
  // single token
  Tensor one = Tensor::from_data({1, 3}, {3.0, 0.0, 4.0});
  Tensor pooled = global_pool(one);
  CHECK(pooled.at(0) == doctest::Approx(0.6));
  CHECK(pooled.at(2) == doctest::Approx(0.8));

  // {e1, -e1, e2} -> e2
  Tensor trio = Tensor::from_data({3, 3}, {1, 0, 0, -1, 0, 0, 0, 1, 0});
  Tensor p = global_pool(trio);
  CHECK(p.at(0) == doctest::Approx(0.0));
  CHECK(p.at(1) == doctest::Approx(1.0));
  CHECK(p.at(2) == doctest::Approx(0.0));

  // unit norm
  Rng rng(19);
  std::vector<double> v(5 * 7);
  for (auto& x : v) x = normal(rng);
  Tensor q = global_pool(Tensor::from_data({5, 7}, v));
  double norm = 0;
  for (double x : q.data()) norm += x * x;
  CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-6);
}

TEST_CASE("teacher: frozen-random determinism and adapter pass-through") {
  auto cfg = tiny_config();
  TeacherHandle t1 = TeacherHandle::frozen_random(cfg, 21);
  TeacherHandle t2 = TeacherHandle::frozen_random(cfg, 21);
  Rng rng(22);
  Tensor img = rand_image(3, 32, rng);
  MaskPlan p = plan_for(16, 0.5, 23);
  Tensor a = teacher_features(t1, img, p);
  Tensor b = teacher_features(t2, img, p);
  CHECK(a.data() == b.data());
  CHECK_FALSE(a.requires_grad());
  CHECK(t1.output_width == cfg.width);
  CHECK_FALSE(t1.adapter.has_value());  // D_t == D: no adapter

  TeacherHandle wide = TeacherHandle::frozen_random(cfg, 21, 24);
  CHECK(wide.output_width == 24);
  CHECK(wide.adapter.has_value());
  Tensor c = teacher_features(wide, img, p);
  CHECK(c.dim(1) == cfg.width);  // adapter maps D_t -> D
}

TEST_CASE("teacher: feature-file round trip gathers requested rows") {
  std::string path = temp_path("feat");
  const std::size_t M = 16, Dt = 16;
  {
    container::FeatureFileWriter w(path, M, Dt, /*f32=*/true);
    Rng rng(24);
    std::vector<double> rows(M * Dt);
    for (auto& x : rows)
      x = static_cast<double>(static_cast<float>(normal(rng)));
    w.append("s0", rows);
    w.finish();
  }
  TeacherHandle t = TeacherHandle::from_feature_file(path, Dt);
  container::FeatureFileReader reader(path);
  Tensor full = reader.read("s0");

  MaskPlan p;
  p.token_count = M;
  p.m.assign(M, 1);
  p.m[0] = 0;
  p.m[5] = 0;
  p.visible = {0, 5};
  for (std::size_t i = 0; i < M; ++i)
    if (p.m[i]) p.masked.push_back(i);

  Tensor img = Tensor::zeros({3, 32, 32});
  Tensor got = teacher_features(t, img, p, "s0");
  REQUIRE(got.dim(0) == 2);
  for (std::size_t j = 0; j < Dt; ++j) {
    CHECK(got.at(j) == full.at(j));
    CHECK(got.at(Dt + j) == full.at(5 * Dt + j));
  }

  CHECK_THROWS_WITH_AS(teacher_features(t, img, p, "missing"),
                       doctest::Contains("missing"), Error);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".idx");
}

TEST_CASE("shared encoder: one parameter object serves both modalities") {
  auto cfg = tiny_config();
  ModelState m = ModelState::init(cfg, 25);
  Rng rng(26);
  Tensor opt = rand_image(3, 32, rng);
  Tensor sar = rand_image(1, 32, rng);
  MaskPlan p = plan_for(16, 0.5, 27);

  Tensor xo1 = encode_visible(m, opt, Modality::optical, p);
  Tensor xs1 = encode_visible(m, sar, Modality::sar, p);

  // mutate one shared encoder weight; both forward passes must change
  const_cast<Tensor&>(m.encoder[0].mlp_fc1.weight).mutable_data()[0] += 0.5;
  Tensor xo2 = encode_visible(m, opt, Modality::optical, p);
  Tensor xs2 = encode_visible(m, sar, Modality::sar, p);
  CHECK(xo1.data() != xo2.data());
  CHECK(xs1.data() != xs2.data());
}

TEST_CASE("teacher parameters are bit-identical after training steps") {
  auto cfg = tiny_config();
  TeacherHandle t = TeacherHandle::frozen_random(cfg, 30);
  std::vector<std::vector<double>> before;
  for (const auto& p : t.frozen_params()) before.push_back(p.data());

  // run a full objective + backward; teacher must not accumulate grads
  ModelState m = ModelState::init(cfg, 31);
  data::SynthConfig sc;
  sc.height = 32;
  sc.width = 32;
  data::Registry reg = data::make_synth_registry(4, 0, 32, sc);
  data::BatchConfig bc;
  bc.batch_size = 2;
  bc.token_count = 16;
  bc.paired_fraction = 1.0;
  data::Batch batch = data::make_batch(reg, bc, nullptr, 33, 0);
  auto breakdown = objectives::total_loss(batch, m, t, {});
  numcore::backward(breakdown.total);

  auto params = t.frozen_params();
  REQUIRE(params.size() == before.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].data() == before[i]);
    CHECK_FALSE(params[i].has_grad());
  }
}

TEST_CASE("decode paths restore full-grid ordering") {
  // index-encoding payloads pushed through assemble_rows recover grid order
  std::size_t M = 8;
  MaskPlan p;
  p.token_count = M;
  p.m = {0, 1, 0, 1, 1, 0, 1, 1};
  p.visible = {5, 0, 2};
  p.masked = {1, 3, 4, 6, 7};
  std::vector<long> src(M, -1);
  for (std::size_t j = 0; j < p.visible.size(); ++j)
    src[p.visible[j]] = static_cast<long>(j);

  std::vector<double> payload;
  for (std::size_t v : p.visible) payload.push_back(static_cast<double>(v));
  Tensor vis = Tensor::from_data({3, 1}, payload);
  Tensor fill = Tensor::from_data({1}, {-1.0});
  Tensor grid = numcore::assemble_rows(vis, fill, src);
  for (std::size_t i = 0; i < M; ++i) {
    if (p.m[i])
      CHECK(grid.at(i) == -1.0);
    else
      CHECK(grid.at(i) == static_cast<double>(i));
  }
}

TEST_CASE("save_model/load_model bit-exact round trip") {
  auto cfg = tiny_config();
  cfg.degradation = DegradationMode::spatial_median;  // exercises rgb head
  ModelState m = ModelState::init(cfg, 40);
  std::string path = temp_path("ckpt");
  save_model(path, m, {{"note", "round-trip"}});

  std::map<std::string, std::string> meta;
  ModelState back = load_model(path, &meta);
  CHECK(meta.at("note") == "round-trip");
  CHECK(back.config.image_size == cfg.image_size);
  CHECK(back.config.degradation == DegradationMode::spatial_median);
  auto a = m.named_params(), b = back.named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.data() == b[i].second.data());
  }
  std::filesystem::remove(path);
}
