// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/nn.hpp"

#include <cmath>

namespace codemae::nn {

using namespace numcore;

namespace {
Tensor randn_matrix(std::size_t r, std::size_t c, Rng& rng, double sigma,
                    DType dtype) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = trunc_normal(rng, sigma);
  Tensor t = Tensor::from_data({r, c}, std::move(v), dtype, true);
  return t;
}
}  // namespace

LinearParams LinearParams::init(std::size_t d_in, std::size_t d_out, Rng& rng,
                                bool with_bias, DType dtype) {
  LinearParams p;
  p.weight = randn_matrix(d_in, d_out, rng, 0.02, dtype);
  if (with_bias) p.bias = Tensor::zeros({d_out}, dtype, true);
  return p;
}

Tensor linear(const Tensor& x, const LinearParams& p) {
  Tensor y = matmul(x, p.weight);
  if (p.bias) y = add_rowvec(y, *p.bias);
  return y;
}

AttentionParams AttentionParams::init(std::size_t width, std::size_t heads,
                                      Rng& rng, DType dtype) {
  if (heads == 0 || width % heads != 0)
    fail(ErrorKind::shape, "attention: head_count must divide width");
  AttentionParams p;
  p.q = LinearParams::init(width, width, rng, true, dtype);
  p.k = LinearParams::init(width, width, rng, true, dtype);
  p.v = LinearParams::init(width, width, rng, true, dtype);
  p.out = LinearParams::init(width, width, rng, true, dtype);
  p.head_count = heads;
  p.head_dim = width / heads;
  return p;
}

Tensor self_attention(const Tensor& tokens, const AttentionParams& p) {
  if (tokens.rank() != 2) fail(ErrorKind::shape, "self_attention: [MxD] input");
  std::size_t width = tokens.dim(1);
  if (p.head_count * p.head_dim != width)
    fail(ErrorKind::shape, "self_attention: head layout mismatch");
  Tensor q = linear(tokens, p.q);
  Tensor k = linear(tokens, p.k);
  Tensor v = linear(tokens, p.v);
  double scale = 1.0 / std::sqrt(static_cast<double>(p.head_dim));
  std::vector<Tensor> heads;
  heads.reserve(p.head_count);
  for (std::size_t h = 0; h < p.head_count; ++h) {
    Tensor qh = slice_cols(q, h * p.head_dim, p.head_dim);
    Tensor kh = slice_cols(k, h * p.head_dim, p.head_dim);
    Tensor vh = slice_cols(v, h * p.head_dim, p.head_dim);
    Tensor att = softmax(mul_scalar(matmul(qh, transpose(kh)), scale));
    heads.push_back(matmul(att, vh));
  }
  Tensor merged = p.head_count == 1 ? heads[0] : concat_cols(heads);
  return linear(merged, p.out);
}

CaBufferParams CaBufferParams::init(std::size_t width, Rng& rng, DType dtype) {
  CaBufferParams p;
  p.wq = randn_matrix(width, width, rng, 0.02, dtype);
  p.wk = randn_matrix(width, width, rng, 0.02, dtype);
  p.wv = randn_matrix(width, width, rng, 0.02, dtype);
  return p;
}

Tensor cross_attention(const Tensor& query_tokens, const Tensor& context_tokens,
                       const CaBufferParams& p) {
  if (query_tokens.rank() != 2 || context_tokens.rank() != 2 ||
      query_tokens.dim(1) != context_tokens.dim(1))
    fail(ErrorKind::shape, "cross_attention: width mismatch");
  std::size_t width = query_tokens.dim(1);
  double scale = 1.0 / std::sqrt(static_cast<double>(width));
  Tensor q = matmul(query_tokens, p.wq);
  Tensor k = matmul(context_tokens, p.wk);
  Tensor v = matmul(context_tokens, p.wv);
  Tensor att = softmax(mul_scalar(matmul(q, transpose(k)), scale));
  return add(query_tokens, matmul(att, v));
}

BlockParams BlockParams::init(std::size_t width, std::size_t heads,
                              std::size_t mlp_hidden, Rng& rng, DType dtype) {
  BlockParams p;
  p.attention = AttentionParams::init(width, heads, rng, dtype);
  p.mlp_fc1 = LinearParams::init(width, mlp_hidden, rng, true, dtype);
  p.mlp_fc2 = LinearParams::init(mlp_hidden, width, rng, true, dtype);
  p.ln1_gamma = Tensor::full({width}, 1.0, dtype, true);
  p.ln1_beta = Tensor::zeros({width}, dtype, true);
  p.ln2_gamma = Tensor::full({width}, 1.0, dtype, true);
  p.ln2_beta = Tensor::zeros({width}, dtype, true);
  return p;
}

Tensor transformer_block(const Tensor& tokens, const BlockParams& p) {
  Tensor x = add(tokens, self_attention(layer_norm(tokens, p.ln1_gamma,
                                                   p.ln1_beta),
                                        p.attention));
  Tensor h = gelu(linear(layer_norm(x, p.ln2_gamma, p.ln2_beta), p.mlp_fc1));
  return add(x, linear(h, p.mlp_fc2));
}

PatchEmbedParams PatchEmbedParams::init(std::size_t channels,
                                        std::size_t patch,
                                        std::size_t grid_tokens,
                                        std::size_t width, Rng& rng,
                                        DType dtype) {
  PatchEmbedParams p;
  p.projection =
      LinearParams::init(channels * patch * patch, width, rng, true, dtype);
  p.patch = patch;
  p.channels = channels;
  p.positional = Tensor::zeros({grid_tokens, width}, dtype, true);
  return p;
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) fail(ErrorKind::shape, "patchify: [C,H,W] input");
  std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h % patch != 0 || w % patch != 0)
    fail(ErrorKind::shape, "patchify: extents not divisible by patch size");
  std::size_t gh = h / patch, gw = w / patch, m = gh * gw;
  std::size_t k = c * patch * patch;
  std::vector<double> out(m * k);
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx) {
      std::size_t row = gy * gw + gx;
      std::size_t o = row * k;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t py = 0; py < patch; ++py)
          for (std::size_t px = 0; px < patch; ++px)
            out[o++] = image.at(ch * h * w + (gy * patch + py) * w +
                                gx * patch + px);
    }
  return Tensor::from_data({m, k}, std::move(out), image.dtype());
}

Tensor patch_embed(const Tensor& image, const PatchEmbedParams& p) {
  if (image.dim(0) != p.channels)
    fail(ErrorKind::shape, "patch_embed: channel count mismatch");
  Tensor patches = patchify(image, p.patch);
  if (patches.dim(0) != p.positional.dim(0))
    fail(ErrorKind::shape, "patch_embed: positional table token count mismatch");
  return add(linear(patches, p.projection), p.positional);
}

void collect_params(const LinearParams& p, std::vector<Tensor>& out) {
  out.push_back(p.weight);
  if (p.bias) out.push_back(*p.bias);
}

void collect_params(const AttentionParams& p, std::vector<Tensor>& out) {
  collect_params(p.q, out);
  collect_params(p.k, out);
  collect_params(p.v, out);
  collect_params(p.out, out);
}

void collect_params(const CaBufferParams& p, std::vector<Tensor>& out) {
  out.push_back(p.wq);
  out.push_back(p.wk);
  out.push_back(p.wv);
}

void collect_params(const BlockParams& p, std::vector<Tensor>& out) {
  collect_params(p.attention, out);
  collect_params(p.mlp_fc1, out);
  collect_params(p.mlp_fc2, out);
  out.push_back(p.ln1_gamma);
  out.push_back(p.ln1_beta);
  out.push_back(p.ln2_gamma);
  out.push_back(p.ln2_beta);
}

void collect_params(const PatchEmbedParams& p, std::vector<Tensor>& out) {
  collect_params(p.projection, out);
  out.push_back(p.positional);
}

}  // namespace codemae::nn
