// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace codemae::objectives {

using model::Modality;
using numcore::ErrorKind;
using numcore::fail;
using namespace numcore;

namespace {

Tensor masked_patch_error(const Tensor& pred, const Tensor& target,
                          const MaskPlan& plan, bool literal_patch_norm) {
  if (pred.shape() != target.shape())
    fail(ErrorKind::shape, "masked patch loss: prediction/target mismatch");
  if (plan.masked.empty())
    fail(ErrorKind::contract, "masked patch loss: degenerate mask (M_inv = 0)");
  Tensor d = square(sub(gather_rows(pred, plan.masked),
                        gather_rows(target, plan.masked)));
  if (literal_patch_norm)
    return mul_scalar(sum(d), 1.0 / static_cast<double>(plan.masked.size()));
  return mean(d);
}

}  // namespace

Tensor loss_mae(const Tensor& r_o, const Tensor& r_s, const Tensor& p_o,
                const Tensor& p_s, const MaskPlan& plan,
                bool literal_patch_norm) {
  return add(masked_patch_error(r_o, p_o, plan, literal_patch_norm),
             masked_patch_error(r_s, p_s, plan, literal_patch_norm));
}

Tensor loss_okd(const Tensor& teacher_tokens, const Tensor& x_o,
                const MaskPlan& plan) {
  if (teacher_tokens.shape() != x_o.shape())
    fail(ErrorKind::shape, "loss_okd: token width mismatch after adapter");
  if (plan.visible.empty())
    fail(ErrorKind::contract, "loss_okd: no visible tokens");
  Tensor d = abs(sub(teacher_tokens, x_o));
  return mul_scalar(sum(d), 1.0 / static_cast<double>(plan.visible.size()));
}

Tensor loss_ccl(const Tensor& pooled_o, const Tensor& pooled_s, double tau,
                bool literal_sum) {
  if (pooled_o.rank() != 2 || pooled_o.shape() != pooled_s.shape())
    fail(ErrorKind::shape, "loss_ccl: [NxD] inputs of equal shape required");
  std::size_t n = pooled_o.dim(0), d = pooled_o.dim(1);
  if (n < 2)
    fail(ErrorKind::contract, "loss_ccl: contrastive-degenerate batch (N < 2)");
  for (const Tensor* t : {&pooled_o, &pooled_s})
    for (std::size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        norm += t->at(i * d + j) * t->at(i * d + j);
      if (std::fabs(std::sqrt(norm) - 1.0) > 1e-3)
        fail(ErrorKind::contract, "loss_ccl: rows must be l2-normalized");
    }

  auto direction = [&](const Tensor& anchor, const Tensor& other) {
    Tensor logits = mul_scalar(matmul(anchor, transpose(other)), 1.0 / tau);
    Tensor per_row = sub(logsumexp_rows(logits), diagonal(logits));
    return literal_sum ? sum(per_row) : mean(per_row);
  };
  return mul_scalar(add(direction(pooled_s, pooled_o),
                        direction(pooled_o, pooled_s)),
                    0.5);
}

std::size_t degraded_channels(std::size_t channels, DegradationMode mode) {
  if (mode == DegradationMode::grayscale) return 1;
  return channels;  // channel-preserving ablations
}

Tensor degrade(const Tensor& patch_pixels, std::size_t channels,
               std::size_t patch, DegradationMode mode) {
  if (channels != 1 && channels != 3)
    fail(ErrorKind::contract, "degrade: channels must be 1 or 3");
  std::size_t p2 = patch * patch;
  if (patch_pixels.rank() != 2 || patch_pixels.dim(1) != channels * p2)
    fail(ErrorKind::shape, "degrade: [M x C*p*p] input required");
  std::size_t m = patch_pixels.dim(0);
  const auto& in = patch_pixels.data();

  if (mode == DegradationMode::grayscale) {
    if (channels == 1) return patch_pixels.detached();
    std::vector<double> out(m * p2);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t i = 0; i < p2; ++i)
        out[r * p2 + i] = 0.299 * in[r * 3 * p2 + i] +
                          0.587 * in[r * 3 * p2 + p2 + i] +
                          0.114 * in[r * 3 * p2 + 2 * p2 + i];
    return Tensor::from_data({m, p2}, std::move(out), patch_pixels.dtype());
  }
  if (mode == DegradationMode::none_rgb) return patch_pixels.detached();

  std::vector<double> out(in.size());
  auto pix = [&](std::size_t r, std::size_t c, long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(patch) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(patch) - 1);
    return in[r * channels * p2 + c * p2 +
              static_cast<std::size_t>(y) * patch + static_cast<std::size_t>(x)];
  };
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x) {
          double v;
          if (mode == DegradationMode::spatial_median) {
            double win[9];
            int k = 0;
            for (long dy = -1; dy <= 1; ++dy)
              for (long dx = -1; dx <= 1; ++dx)
                win[k++] = pix(r, c, static_cast<long>(y) + dy,
                               static_cast<long>(x) + dx);
            std::nth_element(win, win + 4, win + 9);
            v = win[4];
          } else {  // 2x2 average pool then nearest upsample
            std::size_t y0 = (y / 2) * 2, x0 = (x / 2) * 2;
            std::size_t y1 = std::min(y0 + 1, patch - 1);
            std::size_t x1 = std::min(x0 + 1, patch - 1);
            v = 0.25 * (pix(r, c, y0, x0) + pix(r, c, y0, x1) +
                        pix(r, c, y1, x0) + pix(r, c, y1, x1));
          }
          out[r * channels * p2 + c * p2 + y * patch + x] = v;
        }
  return Tensor::from_data(patch_pixels.shape(), std::move(out),
                           patch_pixels.dtype());
}

Tensor loss_cdr(const Tensor& rcdr_o, const Tensor& rcdr_s, const Tensor& p_o,
                const Tensor& p_s, const MaskPlan& plan, std::size_t patch,
                DegradationMode mode, bool literal_patch_norm) {
  // optical branch predicts the degraded SAR patches and vice versa
  Tensor target_for_o = degrade(p_s, 1, patch, mode);
  Tensor target_for_s = degrade(p_o, 3, patch, mode);
  return add(masked_patch_error(rcdr_o, target_for_o, plan, literal_patch_norm),
             masked_patch_error(rcdr_s, target_for_s, plan, literal_patch_norm));
}

namespace {

void check_homogeneous(const Batch& batch) {
  for (const auto& s : batch.samples) {
    bool sample_paired = s.optical.has_value() && s.sar.has_value();
    if (sample_paired != batch.plan.paired)
      fail(ErrorKind::contract,
           "total_loss: mixed paired/unpaired batch violates the batching "
           "contract (sample " + s.sample_id + ")");
  }
}

Tensor mean_of(std::vector<Tensor> parts) {
  Tensor acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
  return mul_scalar(acc, 1.0 / static_cast<double>(parts.size()));
}

}  // namespace

LossBreakdown total_loss(const Batch& batch, const ModelState& model,
                         const TeacherHandle& teacher,
                         const ObjectiveConfig& config) {
  if (batch.samples.empty())
    fail(ErrorKind::contract, "total_loss: empty batch");
  if (batch.samples.size() != batch.plan.masks.size())
    fail(ErrorKind::contract, "total_loss: one mask plan per sample required");
  check_homogeneous(batch);

  const auto dtype = model.config.dtype;
  const std::size_t patch = model.config.patch;
  LossBreakdown out;
  out.paired = batch.plan.paired;

  std::vector<Tensor> mae_parts, okd_parts, cdr_parts;
  std::vector<Tensor> pooled_o, pooled_s;

  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto& s = batch.samples[i];
    const MaskPlan& plan = batch.plan.masks[i];

    if (batch.plan.paired) {
      Tensor p_o = nn::patchify(*s.optical, patch);
      Tensor p_s = nn::patchify(*s.sar, patch);
      Tensor x_o = encode_visible(model, *s.optical, Modality::optical, plan);
      Tensor x_s = encode_visible(model, *s.sar, Modality::sar, plan);
      Tensor r_o = decode_reconstruct(model, x_o, plan, Modality::optical);
      Tensor r_s = decode_reconstruct(model, x_s, plan, Modality::sar);
      mae_parts.push_back(
          loss_mae(r_o, r_s, p_o, p_s, plan, config.literal_patch_norm));

      if (config.enable_okd) {
        Tensor t = teacher_features(teacher, *s.optical, plan, s.sample_id);
        okd_parts.push_back(loss_okd(t, x_o, plan));
      }
      if (config.enable_cdr) {
        std::size_t ch_for_o = degraded_channels(1, config.degradation);
        std::size_t ch_for_s = degraded_channels(3, config.degradation);
        Tensor rcdr_o = decode_cdr(model, x_o, plan, ch_for_o);
        Tensor rcdr_s = decode_cdr(model, x_s, plan, ch_for_s);
        cdr_parts.push_back(loss_cdr(rcdr_o, rcdr_s, p_o, p_s, plan, patch,
                                     config.degradation,
                                     config.literal_patch_norm));
      }
      if (config.enable_ccl) {
        if (config.rigid_contrastive) {
          pooled_o.push_back(model::global_pool(x_o));
          pooled_s.push_back(model::global_pool(x_s));
        } else {
          auto [x_o_cd, x_s_cd] = model::condition(model, x_o, x_s);
          pooled_o.push_back(model::global_pool(x_o_cd));
          pooled_s.push_back(model::global_pool(x_s_cd));
        }
      }
    } else {
      // single-modality sample: reconstruction always, OKD on optical only
      bool optical = s.optical.has_value();
      const Tensor& img = optical ? *s.optical : *s.sar;
      Modality mod = optical ? Modality::optical : Modality::sar;
      Tensor p = nn::patchify(img, patch);
      Tensor x = encode_visible(model, img, mod, plan);
      Tensor r = decode_reconstruct(model, x, plan, mod);
      mae_parts.push_back(masked_patch_error(r, p, plan,
                                             config.literal_patch_norm));
      if (config.enable_okd && optical) {
        Tensor t = teacher_features(teacher, img, plan, s.sample_id);
        okd_parts.push_back(loss_okd(t, x, plan));
      }
    }
  }

  Tensor zero = Tensor::scalar(0.0, dtype);
  out.l_mae = mean_of(mae_parts);
  out.l_okd = okd_parts.empty() ? zero : mean_of(okd_parts);
  out.l_cdr = cdr_parts.empty() ? zero : mean_of(cdr_parts);
  out.l_ccl = pooled_o.empty()
                  ? zero
                  : loss_ccl(stack_rows(pooled_o), stack_rows(pooled_s),
                             config.tau, config.literal_ccl_sum);
  out.total = add(add(add(out.l_mae, out.l_okd), out.l_ccl), out.l_cdr);
  return out;
}

}  // namespace codemae::objectives
