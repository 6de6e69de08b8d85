// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/container.hpp"
#include "core/data.hpp"
#include "core/nn.hpp"

namespace codemae::model {

using data::MaskPlan;
using numcore::DType;
using numcore::Tensor;

enum class Modality { optical, sar };

// Cross-modal degradation target choice; grayscale is the default, the
// others exist for ablations.
enum class DegradationMode { grayscale, none_rgb, spatial_median, spatial_avgpool };

DegradationMode parse_degradation_mode(const std::string& name);
std::string degradation_mode_name(DegradationMode mode);

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t patch = 8;
  std::size_t width = 64;        // encoder width D
  std::size_t decoder_width = 64;
  std::size_t heads = 4;
  std::size_t encoder_depth = 4;
  std::size_t decoder_depth = 8;
  std::size_t cdr_depth = 8;
  std::size_t mlp_ratio = 4;
  DegradationMode degradation = DegradationMode::grayscale;
  DType dtype = DType::f32;

  std::size_t grid() const { return image_size / patch; }
  std::size_t tokens() const { return grid() * grid(); }
};

// All learnable state. Encoder and decoder blocks are single shared objects
// used by both modalities; the CDR decoder has its own blocks but shares the
// mask token and positional table with the main decoder.
struct ModelState {
  ModelConfig config;

  nn::PatchEmbedParams tok_optical, tok_sar;
  std::vector<nn::BlockParams> encoder;
  Tensor enc_norm_gamma, enc_norm_beta;

  nn::LinearParams enc_to_dec;  // width adapter
  std::vector<nn::BlockParams> decoder;
  Tensor mask_token;  // [D_dec]
  Tensor dec_pos;     // [M x D_dec]
  Tensor dec_norm_gamma, dec_norm_beta;
  nn::LinearParams head_optical;  // D_dec -> 3 p^2
  nn::LinearParams head_sar;      // D_dec -> p^2

  std::vector<nn::BlockParams> cdr_decoder;
  Tensor cdr_norm_gamma, cdr_norm_beta;
  nn::LinearParams cdr_head;  // D_dec -> p^2 (grayscale target space)
  // Allocated only for channel-preserving ablation targets (3 p^2).
  std::optional<nn::LinearParams> cdr_head_rgb;

  nn::CaBufferParams ca;  // one shared set for both conditioning directions

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed);

  // Stable enumeration for optimizers and checkpoints.
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;
  void load_tensors(const std::map<std::string, Tensor>& tensors);
};

// Tokenize, gather the plan's visible tokens (plan order), run the shared
// encoder. Output is x_o or x_s.
Tensor encode_visible(const ModelState& m, const Tensor& image,
                      Modality modality, const MaskPlan& plan);

// Scatter visible + mask tokens back into grid order and decode to per-patch
// pixel predictions through the modality head.
Tensor decode_reconstruct(const ModelState& m, const Tensor& x,
                          const MaskPlan& plan, Modality modality);

// Auxiliary shared decoder to the single-channel (or ablation) head.
// `target_channels` selects the head: 1 for grayscale targets, 3 for the
// channel-preserving ablations when the counterpart modality is optical.
Tensor decode_cdr(const ModelState& m, const Tensor& x, const MaskPlan& plan,
                  std::size_t target_channels = 1);

// Both conditioning directions through the one shared CA buffer.
std::pair<Tensor, Tensor> condition(const ModelState& m, const Tensor& x_o,
                                    const Tensor& x_s);

// Token mean followed by l2 normalization.
Tensor global_pool(const Tensor& tokens);

// ---- teacher ----

enum class TeacherKind { frozen_random, feature_file };

struct TeacherHandle {
  TeacherKind kind = TeacherKind::frozen_random;
  std::size_t output_width = 0;  // D_t

  // frozen-random: a frozen copy of the student encoder architecture
  std::shared_ptr<ModelState> frozen;
  // feature-file ingestion
  std::shared_ptr<container::FeatureFileReader> features;
  // D_t -> D map, frozen; absent when D_t == D
  std::optional<nn::LinearParams> adapter;

  static TeacherHandle frozen_random(const ModelConfig& cfg,
                                     std::uint64_t seed,
                                     std::size_t teacher_width = 0);
  static TeacherHandle from_feature_file(const std::string& path,
                                         std::size_t student_width,
                                         std::uint64_t adapter_seed = 1);

  std::vector<Tensor> frozen_params() const;
};

// Full-image teacher tokens gathered at the plan's visible indices. Never
// tracks gradients. `sample_id` resolves feature-file rows.
Tensor teacher_features(const TeacherHandle& teacher, const Tensor& optical,
                        const MaskPlan& plan, const std::string& sample_id = "");

// ---- persistence ----

void save_model(const std::string& path, const ModelState& m,
                const std::map<std::string, std::string>& extra_meta = {},
                const std::vector<std::pair<std::string, Tensor>>& extra = {});
ModelState load_model(const std::string& path,
                      std::map<std::string, std::string>* meta_out = nullptr,
                      std::map<std::string, Tensor>* extra_out = nullptr);

}  // namespace codemae::model
