// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace codemae::data {

using numcore::Tensor;

// ---- synthetic scenes ----

// Piecewise-constant ground truth both sensors observe. Region classes drive
// appearance in both modalities; the dominant class is the probe label.
struct Scene {
  std::size_t height = 0, width = 0;
  std::uint64_t seed = 0;
  std::vector<int> region;        // region id per pixel, contiguous from 0
  std::vector<int> region_class;  // class id per region
  std::vector<std::uint8_t> edges;
  int label = 0;  // class of the largest region
  int region_count = 0;
};

Scene gen_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                int region_count, int class_count = 4);

struct OpticalParams {
  double texture_amp = 0.12;
  double noise_sigma = 0.02;
  double cloud_prob = 0.0;
};

struct SarParams {
  bool speckle = true;     // false emulates the L -> infinity switch
  double looks = 4.0;      // Gamma(L, 1/L) multiplicative speckle
  double azimuth_deg = 30.0;
  double shading = 0.15;   // directional side-looking shading strength
  bool perturb_region = false;  // temporal-asynchrony knob
};

Tensor render_optical(const Scene& scene, std::uint64_t seed,
                      const OpticalParams& params = {});
Tensor render_sar(const Scene& scene, std::uint64_t seed,
                  const SarParams& params = {});

// Luminance of a [3,H,W] image with the standard weights.
Tensor luminance(const Tensor& optical);

// ---- masking ----

struct MaskPlan {
  std::size_t token_count = 0;  // M
  double ratio = 0.0;
  std::vector<std::uint8_t> m;       // 1 = masked
  std::vector<std::size_t> visible;  // shuffled order (MAE convention)
  std::vector<std::size_t> masked;
  std::size_t visible_count() const { return visible.size(); }
  std::size_t masked_count() const { return masked.size(); }
};

MaskPlan make_mask(std::size_t token_count, double ratio, Rng& rng);

// ---- normalization ----

struct ChannelStats {
  std::vector<double> mean, stddev;
};

// Keyed by (dataset_id, modality), modality in {"optical","sar"}.
struct NormStats {
  std::map<std::pair<std::string, std::string>, ChannelStats> entries;

  const ChannelStats& get(const std::string& dataset_id,
                          const std::string& modality) const;
  void save(const std::string& path) const;
  static NormStats load(const std::string& path);
};

NormStats fit_norm_stats(
    const std::map<std::pair<std::string, std::string>, std::vector<Tensor>>&
        samples);
Tensor normalize(const Tensor& image, const ChannelStats& stats);
Tensor denormalize(const Tensor& image, const ChannelStats& stats);

// ---- registry & batching ----

struct SampleRecord {
  std::string dataset_id, sample_id;
  bool paired = true;
  bool has_optical = true, has_sar = true;
  std::optional<std::string> optical_path, sar_path;  // disk-backed
  std::optional<std::uint64_t> synth_seed;            // generator-backed
  int label = -1;
};

struct SynthConfig {
  std::size_t height = 64, width = 64;
  int region_count = 6;
  int class_count = 4;
  OpticalParams optical;
  SarParams sar;
};

struct Registry {
  std::vector<SampleRecord> records;
  SynthConfig synth;
  std::vector<std::size_t> paired_pool, unpaired_optical, unpaired_sar;

  void index_pools();
  bool has_paired() const { return !paired_pool.empty(); }
  bool has_unpaired() const {
    return !unpaired_optical.empty() || !unpaired_sar.empty();
  }
};

// Synthetic registry: `pairs` paired + `unpaired` extra single-modality
// records (alternating optical/SAR), all derived from the master seed.
Registry make_synth_registry(std::size_t pairs, std::size_t unpaired,
                             std::uint64_t seed, const SynthConfig& cfg = {});

// Manifest TSV: dataset_id sample_id optical_path sar_path paired label
// ("-" marks a missing path, label column optional).
Registry load_image_dir(const std::string& root, const std::string& manifest);

struct Sample {
  std::optional<Tensor> optical;  // [3,H,W], normalized when stats given
  std::optional<Tensor> sar;      // [1,H,W]
  int label = -1;
  std::string dataset_id, sample_id;
};

// Decodes or renders one record; dimension mismatch inside a pair is an
// ingestion error naming the sample.
Sample materialize(const Registry& reg, std::size_t index,
                   const NormStats* stats, bool hflip = false);

struct BatchPlan {
  std::vector<std::size_t> sample_indices;
  bool paired = true;
  std::vector<MaskPlan> masks;  // one per sample, shared across modalities
  std::size_t epoch = 0, step = 0;
};

struct Batch {
  BatchPlan plan;
  std::vector<Sample> samples;
};

struct BatchConfig {
  std::size_t batch_size = 8;
  double mask_ratio = 0.75;
  std::size_t token_count = 64;  // M of the model grid
  double paired_fraction = 0.5;  // paired:unpaired batch ratio
  bool hflip = true;
  std::size_t steps_per_epoch = 0;  // derived by the trainer
};

// Pure function of (registry, config, seed, step): step t always yields the
// same batch regardless of who asks, so prefetch workers cannot race.
Batch make_batch(const Registry& reg, const BatchConfig& cfg,
                 const NormStats* stats, std::uint64_t seed, std::size_t step);

// ---- dataset generation (gen-data command) ----

struct GenDataResult {
  std::string manifest_path, stats_path;
  std::size_t paired_rows = 0, unpaired_rows = 0;
};

GenDataResult generate_dataset(const std::string& out_dir, std::size_t scenes,
                               std::size_t size, std::uint64_t seed,
                               double unpaired_fraction,
                               const SynthConfig& cfg = {});

// Fits stats over a registry (renders/loads every sample once).
NormStats fit_registry_stats(const Registry& reg);

}  // namespace codemae::data
