// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"

namespace codemae::diagnostics {

using numcore::Tensor;

// ---- spectra / effective rank ----

struct SpectrumReport {
  std::vector<double> singular_values;  // descending, sigma_1 normalized to 1
  double effective_rank = 1.0;
  std::size_t token_count = 0;
  std::size_t width = 0;
  std::string variant;
};

// Singular values of the mean-centered [n x D] embedding matrix at 64-bit,
// normalized by sigma_1. All-identical rows yield the degenerate rank-1
// report.
SpectrumReport singular_spectrum(const Tensor& embeddings,
                                 const std::string& variant = "");

// exp(-sum p_k log p_k) with p_k = sigma_k / sum(sigma).
double effective_rank(const std::vector<double>& spectrum);

// ---- SSIM / pyramid ----

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5),
// C1=(0.01 L)^2, C2=(0.03 L)^2. Inputs are [H,W] or [1,H,W].
double ssim(const Tensor& a, const Tensor& b, double window_sigma = 1.5,
            double dynamic_range = 1.0);

// Repeated 5-tap binomial blur + 2x decimation; level 1 is the input.
std::vector<Tensor> gaussian_pyramid(const Tensor& img, std::size_t levels);

struct CurveRow {
  std::size_t level = 0;
  double equivalent_scale = 1.0;  // 2^level
  double mean_ssim = 0.0;
  double std_ssim = 0.0;
};

// SSIM between optical luminance and the SAR channel at each pyramid level.
std::vector<CurveRow> heterogeneity_curve(
    const std::vector<std::pair<Tensor, Tensor>>& pairs, std::size_t levels);

// ---- alignment ----

struct AlignmentPoint {
  double patch_ssim = 0.0;
  double embedding_cosine = 0.0;
  std::size_t patch_index = 0;
  std::string sample_id;
};

// Dense (no-mask) encoder tokens per modality; per spatial patch the input
// heterogeneity (patch SSIM between optical luminance and SAR) against the
// cross-modal embedding cosine at the same index. Samples are raw [0,1]
// images; when stats are given the encoder sees the normalized copies while
// SSIM stays in raw input space.
std::vector<AlignmentPoint> alignment_vs_heterogeneity(
    const std::vector<data::Sample>& pairs, const model::ModelState& m,
    const data::NormStats* stats = nullptr);

// Spearman rank correlation between the two coordinates.
double spearman(const std::vector<AlignmentPoint>& points);

// ---- PCA ----

// Top-k principal directions of the centered matrix; deterministic sign
// convention (first nonzero loading positive).
Tensor pca_project(const Tensor& embeddings, std::size_t k = 2);

// ---- linear probing ----

struct ProbeConfig {
  double learning_rate = 0.5;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-6;
  double holdout_fraction = 0.25;
  std::uint64_t seed = 0;
};

// Multinomial logistic regression on frozen features, full-batch gradient
// descent to convergence; returns held-out accuracy on a seeded split.
double linear_probe(const Tensor& features, const std::vector<int>& labels,
                    const ProbeConfig& config);

// Dense mean-pooled encoder embedding of one image (frozen forward).
Tensor frozen_embedding(const model::ModelState& m, const Tensor& image,
                        model::Modality modality);

// ---- report I/O ----

void write_spectrum_csv(const std::string& path, const SpectrumReport& report);
void write_curve_csv(const std::string& path,
                     const std::vector<CurveRow>& rows);
void write_alignment_csv(const std::string& path,
                         const std::vector<AlignmentPoint>& points);
void write_summary_kv(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace codemae::diagnostics
