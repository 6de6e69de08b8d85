// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "core/data.hpp"
#include "core/model.hpp"

namespace codemae::objectives {

using data::Batch;
using data::MaskPlan;
using model::DegradationMode;
using model::ModelState;
using model::TeacherHandle;
using numcore::Tensor;

struct LossBreakdown {
  Tensor l_mae, l_okd, l_ccl, l_cdr, total;  // scalars
  bool paired = false;
};

struct ObjectiveConfig {
  bool enable_okd = true;
  bool enable_ccl = true;
  bool enable_cdr = true;
  // Contrast raw pooled embeddings with no CA buffer (degradation comparator).
  bool rigid_contrastive = false;
  double tau = 0.07;
  DegradationMode degradation = DegradationMode::grayscale;
  // Fidelity switches: per-patch norm-sum instead of per-element mean, and
  // batch-sum instead of batch-mean in the contrastive term.
  bool literal_patch_norm = false;
  bool literal_ccl_sum = false;
};

// Masked-patch reconstruction error summed over both modality terms.
// R_*/P_* are [M x K_mod]; per-patch squared error is averaged per element
// unless `literal_patch_norm`.
Tensor loss_mae(const Tensor& r_o, const Tensor& r_s, const Tensor& p_o,
                const Tensor& p_s, const MaskPlan& plan,
                bool literal_patch_norm = false);

// Mean over visible tokens of the per-token l1 distance to the teacher.
Tensor loss_okd(const Tensor& teacher_tokens, const Tensor& x_o,
                const MaskPlan& plan);

// Symmetric InfoNCE on already-normalized [N x D] rows.
Tensor loss_ccl(const Tensor& pooled_o, const Tensor& pooled_s, double tau,
                bool literal_sum = false);

// Target-side degradation. Input rows are per-patch pixels, channel-major
// ([K = channels * p^2]); grayscale collapses 3 channels to luminance,
// 1-channel input is the identity. Spatial modes filter within the patch
// and keep the channel count.
Tensor degrade(const Tensor& patch_pixels, std::size_t channels,
               std::size_t patch, DegradationMode mode);

// Number of channels degrade() leaves for a given source channel count.
std::size_t degraded_channels(std::size_t channels, DegradationMode mode);

// Cross-modal degraded reconstruction: each branch's CDR prediction against
// the degraded counterpart patches, masked positions only, both directions.
Tensor loss_cdr(const Tensor& rcdr_o, const Tensor& rcdr_s, const Tensor& p_o,
                const Tensor& p_s, const MaskPlan& plan, std::size_t patch,
                DegradationMode mode, bool literal_patch_norm = false);

// Full forward over one homogeneous batch. Unpaired batches gate CCL/CDR to
// exact zeros (their forward work is skipped entirely) and OKD contributes
// only on optical samples.
LossBreakdown total_loss(const Batch& batch, const ModelState& model,
                         const TeacherHandle& teacher,
                         const ObjectiveConfig& config);

}  // namespace codemae::objectives
