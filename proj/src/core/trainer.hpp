// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"
#include "core/objectives.hpp"

namespace codemae::trainer {

using numcore::Tensor;

struct TrainConfig {
  model::ModelConfig model;
  objectives::ObjectiveConfig objectives;

  std::size_t epochs = 50;
  std::size_t warmup_epochs = 5;
  std::size_t batch_size = 8;
  double base_lr = 1.5e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9, beta2 = 0.95, adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 disables (default)
  double mask_ratio = 0.75;
  double paired_fraction = 0.5;
  bool hflip = true;
  std::uint64_t seed = 0;
  std::size_t steps_per_epoch = 0;  // 0: ceil(records / batch)
  std::size_t checkpoint_every_epochs = 0;  // 0: final only

  // data source: synthetic unless data_dir is set
  std::size_t synth_pairs = 64, synth_unpaired = 0;
  // render SAR from perturbed region maps (cross-modal ambiguity ablation)
  bool synth_sar_perturb = false;
  // per-image cloud occlusion probability in synthetic optical renders
  double synth_cloud_prob = 0.0;
  // chromatic texture amplitude in synthetic optical renders
  double synth_texture_amp = 0.12;
  std::string data_dir, data_manifest;  // manifest relative to data_dir

  // teacher: frozen-random copy unless a feature file is given
  std::string teacher_features_path;
  std::size_t teacher_width = 0;  // 0: student width

  std::string out_dir;  // empty: in-memory only
  std::string resume;   // checkpoint path

  void validate() const;
  std::string fingerprint() const;  // stable hash over every field
};

// Linear ramp 0 -> base over the warmup steps, then cosine to 0 at
// total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps,
                   std::size_t warmup_steps, double base);

struct AdamWState {
  // first/second moments per parameter name, stored at model precision
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments;
  std::size_t t = 0;
};

// Decoupled-weight-decay update with bias-corrected moments. Missing grads
// (gated-off branches) count as zero. NaN grads abort naming the parameter.
void adamw_step(const std::vector<std::pair<std::string, Tensor>>& params,
                AdamWState& state, double lr, const TrainConfig& cfg);

struct StepRecord {
  std::size_t step = 0, epoch = 0;
  double lr = 0, l_mae = 0, l_okd = 0, l_ccl = 0, l_cdr = 0, total = 0;
  bool paired = false;
};

struct TrainResult {
  model::ModelState model;
  std::vector<StepRecord> metrics;
  std::string metrics_path, checkpoint_path;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepRecord& r);

TrainResult train(const TrainConfig& cfg);

}  // namespace codemae::trainer
