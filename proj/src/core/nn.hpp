// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace codemae::nn {

using numcore::DType;
using numcore::Tensor;

struct LinearParams {
  Tensor weight;               // [D_in x D_out]
  std::optional<Tensor> bias;  // [D_out]

  static LinearParams init(std::size_t d_in, std::size_t d_out, Rng& rng,
                           bool with_bias = true, DType dtype = DType::f32);
};

Tensor linear(const Tensor& x, const LinearParams& p);

struct AttentionParams {
  LinearParams q, k, v, out;
  std::size_t head_count = 1;
  std::size_t head_dim = 0;  // head_count * head_dim == D

  static AttentionParams init(std::size_t width, std::size_t heads, Rng& rng,
                              DType dtype = DType::f32);
};

// Standard multi-head scaled dot-product attention, no residual.
Tensor self_attention(const Tensor& tokens, const AttentionParams& p);

// Single-head conditioning buffer: x + softmax(xWq (ctx Wk)^T / sqrt(D)) ctx Wv.
// Residual lives inside; the scale is over the full width D.
struct CaBufferParams {
  Tensor wq, wk, wv;  // each [D x D], bias-free

  static CaBufferParams init(std::size_t width, Rng& rng,
                             DType dtype = DType::f32);
};

Tensor cross_attention(const Tensor& query_tokens, const Tensor& context_tokens,
                       const CaBufferParams& p);

struct BlockParams {
  AttentionParams attention;
  LinearParams mlp_fc1, mlp_fc2;
  Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

  static BlockParams init(std::size_t width, std::size_t heads,
                          std::size_t mlp_hidden, Rng& rng,
                          DType dtype = DType::f32);
};

// Pre-norm: x + Attn(LN(x)); then x + MLP(LN(x)).
Tensor transformer_block(const Tensor& tokens, const BlockParams& p);

struct PatchEmbedParams {
  LinearParams projection;  // [C*p*p x D]
  std::size_t patch = 0;
  std::size_t channels = 0;
  Tensor positional;  // [M x D]

  static PatchEmbedParams init(std::size_t channels, std::size_t patch,
                               std::size_t grid_tokens, std::size_t width,
                               Rng& rng, DType dtype = DType::f32);
};

// Reorders a [C,H,W] image into [M x C*p*p] patch rows (row-major grid,
// channel-major within a patch). Pure data movement, no tape.
Tensor patchify(const Tensor& image, std::size_t patch);

// token i = flatten(patch i) * W + b + pos[i].
Tensor patch_embed(const Tensor& image, const PatchEmbedParams& p);

// All learnable tensors of a parameter struct, for optimizers/checkpoints.
void collect_params(const LinearParams& p, std::vector<Tensor>& out);
void collect_params(const AttentionParams& p, std::vector<Tensor>& out);
void collect_params(const CaBufferParams& p, std::vector<Tensor>& out);
void collect_params(const BlockParams& p, std::vector<Tensor>& out);
void collect_params(const PatchEmbedParams& p, std::vector<Tensor>& out);

}  // namespace codemae::nn
