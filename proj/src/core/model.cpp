// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/model.hpp"

#include <algorithm>
#include <cmath>

namespace codemae::model {

using numcore::ErrorKind;
using numcore::fail;
using namespace nn;

DegradationMode parse_degradation_mode(const std::string& name) {
  if (name == "grayscale") return DegradationMode::grayscale;
  if (name == "none-rgb") return DegradationMode::none_rgb;
  if (name == "spatial-median") return DegradationMode::spatial_median;
  if (name == "spatial-avgpool") return DegradationMode::spatial_avgpool;
  fail(ErrorKind::usage, "unknown degradation mode: " + name);
}

std::string degradation_mode_name(DegradationMode mode) {
  switch (mode) {
    case DegradationMode::grayscale: return "grayscale";
    case DegradationMode::none_rgb: return "none-rgb";
    case DegradationMode::spatial_median: return "spatial-median";
    case DegradationMode::spatial_avgpool: return "spatial-avgpool";
  }
  return "grayscale";
}

ModelState ModelState::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.image_size % cfg.patch != 0)
    fail(ErrorKind::shape, "model: image size not divisible by patch size");
  Rng rng(mix_seed(seed, 0x4d4f44454cULL));
  ModelState m;
  m.config = cfg;
  std::size_t M = cfg.tokens();
  std::size_t p2 = cfg.patch * cfg.patch;
  DType dt = cfg.dtype;

  m.tok_optical = PatchEmbedParams::init(3, cfg.patch, M, cfg.width, rng, dt);
  m.tok_sar = PatchEmbedParams::init(1, cfg.patch, M, cfg.width, rng, dt);
  for (std::size_t i = 0; i < cfg.encoder_depth; ++i)
    m.encoder.push_back(BlockParams::init(cfg.width, cfg.heads,
                                          cfg.width * cfg.mlp_ratio, rng, dt));
  m.enc_norm_gamma = Tensor::full({cfg.width}, 1.0, dt, true);
  m.enc_norm_beta = Tensor::zeros({cfg.width}, dt, true);

  m.enc_to_dec = LinearParams::init(cfg.width, cfg.decoder_width, rng, true, dt);
  for (std::size_t i = 0; i < cfg.decoder_depth; ++i)
    m.decoder.push_back(BlockParams::init(
        cfg.decoder_width, cfg.heads, cfg.decoder_width * cfg.mlp_ratio, rng, dt));
  {
    std::vector<double> v(cfg.decoder_width);
    for (auto& x : v) x = trunc_normal(rng, 0.02);
    m.mask_token = Tensor::from_data({cfg.decoder_width}, std::move(v), dt, true);
  }
  m.dec_pos = Tensor::zeros({M, cfg.decoder_width}, dt, true);
  m.dec_norm_gamma = Tensor::full({cfg.decoder_width}, 1.0, dt, true);
  m.dec_norm_beta = Tensor::zeros({cfg.decoder_width}, dt, true);
  m.head_optical = LinearParams::init(cfg.decoder_width, 3 * p2, rng, true, dt);
  m.head_sar = LinearParams::init(cfg.decoder_width, p2, rng, true, dt);

  for (std::size_t i = 0; i < cfg.cdr_depth; ++i)
    m.cdr_decoder.push_back(BlockParams::init(
        cfg.decoder_width, cfg.heads, cfg.decoder_width * cfg.mlp_ratio, rng, dt));
  m.cdr_norm_gamma = Tensor::full({cfg.decoder_width}, 1.0, dt, true);
  m.cdr_norm_beta = Tensor::zeros({cfg.decoder_width}, dt, true);
  m.cdr_head = LinearParams::init(cfg.decoder_width, p2, rng, true, dt);
  if (cfg.degradation != DegradationMode::grayscale)
    m.cdr_head_rgb = LinearParams::init(cfg.decoder_width, 3 * p2, rng, true, dt);

  m.ca = CaBufferParams::init(cfg.width, rng, dt);
  return m;
}

namespace {

void name_linear(const std::string& prefix, const LinearParams& p,
                 std::vector<std::pair<std::string, Tensor>>& out) {
  out.emplace_back(prefix + ".w", p.weight);
  if (p.bias) out.emplace_back(prefix + ".b", *p.bias);
}

void name_block(const std::string& prefix, const BlockParams& p,
                std::vector<std::pair<std::string, Tensor>>& out) {
  name_linear(prefix + ".attn.q", p.attention.q, out);
  name_linear(prefix + ".attn.k", p.attention.k, out);
  name_linear(prefix + ".attn.v", p.attention.v, out);
  name_linear(prefix + ".attn.o", p.attention.out, out);
  name_linear(prefix + ".fc1", p.mlp_fc1, out);
  name_linear(prefix + ".fc2", p.mlp_fc2, out);
  out.emplace_back(prefix + ".ln1.g", p.ln1_gamma);
  out.emplace_back(prefix + ".ln1.b", p.ln1_beta);
  out.emplace_back(prefix + ".ln2.g", p.ln2_gamma);
  out.emplace_back(prefix + ".ln2.b", p.ln2_beta);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelState::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  name_linear("tok_opt.proj", tok_optical.projection, out);
  out.emplace_back("tok_opt.pos", tok_optical.positional);
  name_linear("tok_sar.proj", tok_sar.projection, out);
  out.emplace_back("tok_sar.pos", tok_sar.positional);
  for (std::size_t i = 0; i < encoder.size(); ++i)
    name_block("enc." + std::to_string(i), encoder[i], out);
  out.emplace_back("enc.norm.g", enc_norm_gamma);
  out.emplace_back("enc.norm.b", enc_norm_beta);
  name_linear("adapter", enc_to_dec, out);
  for (std::size_t i = 0; i < decoder.size(); ++i)
    name_block("dec." + std::to_string(i), decoder[i], out);
  out.emplace_back("dec.mask_token", mask_token);
  out.emplace_back("dec.pos", dec_pos);
  out.emplace_back("dec.norm.g", dec_norm_gamma);
  out.emplace_back("dec.norm.b", dec_norm_beta);
  name_linear("head.opt", head_optical, out);
  name_linear("head.sar", head_sar, out);
  for (std::size_t i = 0; i < cdr_decoder.size(); ++i)
    name_block("cdr." + std::to_string(i), cdr_decoder[i], out);
  out.emplace_back("cdr.norm.g", cdr_norm_gamma);
  out.emplace_back("cdr.norm.b", cdr_norm_beta);
  name_linear("cdr.head", cdr_head, out);
  if (cdr_head_rgb) name_linear("cdr.head_rgb", *cdr_head_rgb, out);
  out.emplace_back("ca.wq", ca.wq);
  out.emplace_back("ca.wk", ca.wk);
  out.emplace_back("ca.wv", ca.wv);
  return out;
}

std::vector<Tensor> ModelState::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

void ModelState::load_tensors(const std::map<std::string, Tensor>& tensors) {
  for (auto& [name, t] : named_params()) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      fail(ErrorKind::io, "checkpoint missing parameter: " + name);
    if (it->second.shape() != t.shape())
      fail(ErrorKind::io, "checkpoint shape mismatch for: " + name);
    const_cast<Tensor&>(t).mutable_data() = it->second.data();
  }
}

namespace {

const PatchEmbedParams& tokenizer(const ModelState& m, Modality mod) {
  return mod == Modality::optical ? m.tok_optical : m.tok_sar;
}

Tensor run_encoder(const ModelState& m, const Tensor& tokens) {
  Tensor x = tokens;
  for (const auto& blk : m.encoder) x = transformer_block(x, blk);
  return layer_norm(x, m.enc_norm_gamma, m.enc_norm_beta);
}

// Visible rows back into grid order with mask tokens at masked slots.
std::vector<long> grid_sources(const MaskPlan& plan) {
  std::vector<long> src(plan.token_count, -1);
  for (std::size_t j = 0; j < plan.visible.size(); ++j)
    src[plan.visible[j]] = static_cast<long>(j);
  return src;
}

Tensor run_decoder(const ModelState& m, const std::vector<nn::BlockParams>& blocks,
                   const Tensor& norm_gamma, const Tensor& norm_beta,
                   const Tensor& x, const MaskPlan& plan) {
  Tensor lat = linear(x, m.enc_to_dec);
  Tensor grid = numcore::assemble_rows(lat, m.mask_token, grid_sources(plan));
  grid = numcore::add(grid, m.dec_pos);
  for (const auto& blk : blocks) grid = transformer_block(grid, blk);
  return layer_norm(grid, norm_gamma, norm_beta);
}

}  // namespace

Tensor encode_visible(const ModelState& m, const Tensor& image,
                      Modality modality, const MaskPlan& plan) {
  Tensor tokens = patch_embed(image, tokenizer(m, modality));
  if (plan.token_count != tokens.dim(0))
    fail(ErrorKind::shape, "encode_visible: mask plan token count mismatch");
  if (!plan.visible.empty())
    tokens = numcore::gather_rows(tokens, plan.visible);
  return run_encoder(m, tokens);
}

Tensor decode_reconstruct(const ModelState& m, const Tensor& x,
                          const MaskPlan& plan, Modality modality) {
  Tensor grid = run_decoder(m, m.decoder, m.dec_norm_gamma, m.dec_norm_beta,
                            x, plan);
  return linear(grid, modality == Modality::optical ? m.head_optical
                                                    : m.head_sar);
}

Tensor decode_cdr(const ModelState& m, const Tensor& x, const MaskPlan& plan,
                  std::size_t target_channels) {
  Tensor grid = run_decoder(m, m.cdr_decoder, m.cdr_norm_gamma,
                            m.cdr_norm_beta, x, plan);
  if (target_channels == 1) return linear(grid, m.cdr_head);
  if (!m.cdr_head_rgb)
    fail(ErrorKind::contract,
         "decode_cdr: rgb head requested but not configured");
  return linear(grid, *m.cdr_head_rgb);
}

std::pair<Tensor, Tensor> condition(const ModelState& m, const Tensor& x_o,
                                    const Tensor& x_s) {
  return {cross_attention(x_o, x_s, m.ca), cross_attention(x_s, x_o, m.ca)};
}

Tensor global_pool(const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.dim(0) == 0)
    fail(ErrorKind::shape, "global_pool: nonempty [M'xD] input required");
  return numcore::l2_normalize(numcore::mean_rows(tokens));
}

// ---- teacher ----

TeacherHandle TeacherHandle::frozen_random(const ModelConfig& cfg,
                                           std::uint64_t seed,
                                           std::size_t teacher_width) {
  TeacherHandle t;
  t.kind = TeacherKind::frozen_random;
  ModelConfig tcfg = cfg;
  if (teacher_width) tcfg.width = teacher_width;
  tcfg.decoder_depth = 1;  // decoder unused by the teacher path
  tcfg.cdr_depth = 1;
  t.frozen = std::make_shared<ModelState>(
      ModelState::init(tcfg, mix_seed(seed, 0x7eac4e6ULL)));
  t.output_width = tcfg.width;
  for (auto& p : t.frozen->params()) p.set_requires_grad(false);
  if (t.output_width != cfg.width) {
    Rng rng(mix_seed(seed, 0xada97e50ULL));
    t.adapter = LinearParams::init(t.output_width, cfg.width, rng, false,
                                   cfg.dtype);
    t.adapter->weight.set_requires_grad(false);
  }
  return t;
}

TeacherHandle TeacherHandle::from_feature_file(const std::string& path,
                                               std::size_t student_width,
                                               std::uint64_t adapter_seed) {
  TeacherHandle t;
  t.kind = TeacherKind::feature_file;
  t.features = std::make_shared<container::FeatureFileReader>(path);
  t.output_width = t.features->header().width;
  if (t.output_width != student_width) {
    Rng rng(mix_seed(adapter_seed, 0xada97e50ULL));
    t.adapter = LinearParams::init(t.output_width, student_width, rng, false);
    t.adapter->weight.set_requires_grad(false);
  }
  return t;
}

std::vector<Tensor> TeacherHandle::frozen_params() const {
  std::vector<Tensor> out;
  if (frozen) out = frozen->params();
  if (adapter) nn::collect_params(*adapter, out);
  return out;
}

Tensor teacher_features(const TeacherHandle& teacher, const Tensor& optical,
                        const MaskPlan& plan, const std::string& sample_id) {
  Tensor full;
  if (teacher.kind == TeacherKind::frozen_random) {
    Tensor tokens = patch_embed(optical, teacher.frozen->tok_optical);
    Tensor x = tokens;
    for (const auto& blk : teacher.frozen->encoder)
      x = transformer_block(x, blk);
    full = layer_norm(x, teacher.frozen->enc_norm_gamma,
                      teacher.frozen->enc_norm_beta);
  } else {
    full = teacher.features->read(sample_id);
  }
  if (full.dim(0) != plan.token_count)
    fail(ErrorKind::shape, "teacher_features: token count mismatch");
  Tensor vis = numcore::gather_rows(full, plan.visible);
  if (teacher.adapter) vis = linear(vis, *teacher.adapter);
  return vis.detached();
}

// ---- persistence ----

void save_model(const std::string& path, const ModelState& m,
                const std::map<std::string, std::string>& extra_meta,
                const std::vector<std::pair<std::string, Tensor>>& extra) {
  std::map<std::string, std::string> meta = extra_meta;
  const ModelConfig& c = m.config;
  meta["model.image_size"] = std::to_string(c.image_size);
  meta["model.patch"] = std::to_string(c.patch);
  meta["model.width"] = std::to_string(c.width);
  meta["model.decoder_width"] = std::to_string(c.decoder_width);
  meta["model.heads"] = std::to_string(c.heads);
  meta["model.encoder_depth"] = std::to_string(c.encoder_depth);
  meta["model.decoder_depth"] = std::to_string(c.decoder_depth);
  meta["model.cdr_depth"] = std::to_string(c.cdr_depth);
  meta["model.mlp_ratio"] = std::to_string(c.mlp_ratio);
  meta["model.degradation"] = degradation_mode_name(c.degradation);
  meta["model.dtype"] = c.dtype == DType::f32 ? "f32" : "f64";
  auto tensors = m.named_params();
  for (const auto& e : extra) tensors.push_back(e);
  container::save_checkpoint(path, meta, tensors);
}

ModelState load_model(const std::string& path,
                      std::map<std::string, std::string>* meta_out,
                      std::map<std::string, Tensor>* extra_out) {
  auto ck = container::load_checkpoint(path);
  auto need = [&](const std::string& k) {
    auto it = ck.meta.find(k);
    if (it == ck.meta.end())
      fail(ErrorKind::io, "checkpoint meta missing key: " + k);
    return it->second;
  };
  ModelConfig cfg;
  cfg.image_size = std::stoul(need("model.image_size"));
  cfg.patch = std::stoul(need("model.patch"));
  cfg.width = std::stoul(need("model.width"));
  cfg.decoder_width = std::stoul(need("model.decoder_width"));
  cfg.heads = std::stoul(need("model.heads"));
  cfg.encoder_depth = std::stoul(need("model.encoder_depth"));
  cfg.decoder_depth = std::stoul(need("model.decoder_depth"));
  cfg.cdr_depth = std::stoul(need("model.cdr_depth"));
  cfg.mlp_ratio = std::stoul(need("model.mlp_ratio"));
  cfg.degradation = parse_degradation_mode(need("model.degradation"));
  cfg.dtype = need("model.dtype") == "f64" ? DType::f64 : DType::f32;

  ModelState m = ModelState::init(cfg, 0);
  m.load_tensors(ck.tensors);
  if (meta_out) *meta_out = ck.meta;
  if (extra_out) *extra_out = ck.tensors;
  return m;
}

}  // namespace codemae::model
