// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/rng.hpp"

namespace codemae::trainer {

using numcore::DType;
using numcore::ErrorKind;
using numcore::fail;

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorKind::usage, "train: epochs must be positive");
  if (warmup_epochs >= epochs)
    fail(ErrorKind::usage, "train: warmup epochs must be < epochs");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    fail(ErrorKind::usage, "train: mask ratio must be in (0,1)");
  if (batch_size == 0) fail(ErrorKind::usage, "train: batch size must be positive");
  if (base_lr <= 0) fail(ErrorKind::usage, "train: learning rate must be positive");
  if (model.image_size % model.patch != 0)
    fail(ErrorKind::usage, "train: image size not divisible by patch size");
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << model.image_size << '|' << model.patch << '|' << model.width << '|'
    << model.decoder_width << '|' << model.heads << '|' << model.encoder_depth
    << '|' << model.decoder_depth << '|' << model.cdr_depth << '|'
    << model.mlp_ratio << '|' << static_cast<int>(model.dtype) << '|'
    << objectives.enable_okd << objectives.enable_ccl << objectives.enable_cdr
    << objectives.rigid_contrastive << '|' << objectives.tau << '|'
    << model::degradation_mode_name(objectives.degradation) << '|'
    << objectives.literal_patch_norm << objectives.literal_ccl_sum << '|'
    << epochs << '|' << warmup_epochs << '|' << batch_size << '|' << base_lr
    << '|' << weight_decay << '|' << beta1 << '|' << beta2 << '|' << adam_eps
    << '|' << grad_clip << '|' << mask_ratio << '|' << paired_fraction << '|'
    << hflip << '|' << seed << '|' << steps_per_epoch << '|' << synth_pairs
    << '|' << synth_unpaired << '|' << synth_sar_perturb << '|'
    << synth_cloud_prob << '|' << synth_texture_amp << '|' << data_dir
    << '|' << data_manifest << '|'
    << teacher_features_path << '|' << teacher_width;
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double lr_schedule(std::size_t step, std::size_t total_steps,
                   std::size_t warmup_steps, double base) {
  if (total_steps == 0) fail(ErrorKind::usage, "lr_schedule: zero total steps");
  if (warmup_steps > 0 && step < warmup_steps)
    return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base * (1.0 + std::cos(M_PI * progress));
}

void adamw_step(const std::vector<std::pair<std::string, Tensor>>& params,
                AdamWState& state, double lr, const TrainConfig& cfg) {
  state.t++;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  // NaN audit and optional global-norm clip before touching any state.
  double sq_norm = 0.0;
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (std::isnan(g) || std::isinf(g))
        fail(ErrorKind::numeric, "adamw: non-finite gradient in parameter " + name);
      sq_norm += g * g;
    }
  }
  double clip_scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    double norm = std::sqrt(sq_norm);
    if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
  }

  for (const auto& [name, p] : params) {
    Tensor& param = const_cast<Tensor&>(p);
    auto& values = param.mutable_data();
    bool f32 = param.dtype() == DType::f32;
    auto rnd = [f32](double x) {
      return f32 ? static_cast<double>(static_cast<float>(x)) : x;
    };
    auto& [m, v] = state.moments[name];
    if (m.size() != values.size()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    const std::vector<double>* grad = p.has_grad() ? &p.grad() : nullptr;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = (grad ? (*grad)[i] : 0.0) * clip_scale;
      m[i] = rnd(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g);
      v[i] = rnd(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g);
      double mhat = m[i] / bc1, vhat = v[i] / bc2;
      double update = lr * mhat / (std::sqrt(vhat) + cfg.adam_eps) +
                      lr * cfg.weight_decay * values[i];
      values[i] = rnd(values[i] - update);
    }
  }
}

std::string metrics_csv_header() {
  return "step,epoch,lr,l_mae,l_okd,l_ccl,l_cdr,total,paired_flag";
}

std::string metrics_csv_row(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d",
                r.step, r.epoch, r.lr, r.l_mae, r.l_okd, r.l_ccl, r.l_cdr,
                r.total, r.paired ? 1 : 0);
  return buf;
}

namespace {

void save_state(const std::string& path, const model::ModelState& m,
                const TrainConfig& cfg, const AdamWState& opt,
                std::size_t next_step, std::size_t epoch,
                const std::vector<StepRecord>& metrics) {
  std::map<std::string, std::string> meta;
  meta["train.fingerprint"] = cfg.fingerprint();
  meta["train.step"] = std::to_string(next_step);
  meta["train.epoch"] = std::to_string(epoch);
  meta["train.seed"] = std::to_string(cfg.seed);
  meta["train.opt_t"] = std::to_string(opt.t);
  meta["train.rng"] = "stateless(seed,step)";
  std::size_t tail = std::min<std::size_t>(metrics.size(), 5);
  for (std::size_t i = 0; i < tail; ++i)
    meta["history." + std::to_string(i)] =
        metrics_csv_row(metrics[metrics.size() - tail + i]);

  std::vector<std::pair<std::string, Tensor>> extra;
  for (const auto& [name, moments] : opt.moments) {
    extra.emplace_back("opt." + name + ".m",
                       Tensor::from_data({moments.first.size()}, moments.first,
                                         m.config.dtype));
    extra.emplace_back("opt." + name + ".v",
                       Tensor::from_data({moments.second.size()},
                                         moments.second, m.config.dtype));
  }
  model::save_model(path, m, meta, extra);
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();

  // data
  data::Registry reg;
  if (cfg.data_dir.empty()) {
    data::SynthConfig sc;
    sc.height = cfg.model.image_size;
    sc.width = cfg.model.image_size;
    sc.sar.perturb_region = cfg.synth_sar_perturb;
    sc.optical.cloud_prob = cfg.synth_cloud_prob;
    sc.optical.texture_amp = cfg.synth_texture_amp;
    reg = data::make_synth_registry(cfg.synth_pairs, cfg.synth_unpaired,
                                    mix_seed(cfg.seed, 0xda7aULL), sc);
  } else {
    reg = data::load_image_dir(cfg.data_dir, cfg.data_manifest.empty()
                                                 ? "manifest.tsv"
                                                 : cfg.data_manifest);
  }
  if (reg.records.empty()) fail(ErrorKind::usage, "train: empty data registry");
  data::NormStats stats = data::fit_registry_stats(reg);

  // surface data/model incompatibilities before step 0
  {
    data::Sample probe = data::materialize(reg, 0, &stats, false);
    const Tensor& img = probe.optical ? *probe.optical : *probe.sar;
    if (img.dim(1) != cfg.model.image_size || img.dim(2) != cfg.model.image_size)
      fail(ErrorKind::usage,
           "train: data extent " + std::to_string(img.dim(1)) +
               " does not match model image size " +
               std::to_string(cfg.model.image_size));
  }

  model::ModelConfig mc = cfg.model;
  mc.degradation = cfg.objectives.degradation;
  model::ModelState m = model::ModelState::init(mc, cfg.seed);

  model::TeacherHandle teacher =
      cfg.teacher_features_path.empty()
          ? model::TeacherHandle::frozen_random(
                mc, mix_seed(cfg.seed, 0x7eacULL), cfg.teacher_width)
          : model::TeacherHandle::from_feature_file(
                cfg.teacher_features_path, mc.width,
                mix_seed(cfg.seed, 0xada9ULL));

  std::size_t spe = cfg.steps_per_epoch
                        ? cfg.steps_per_epoch
                        : (reg.records.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total_steps = spe * cfg.epochs;
  std::size_t warmup_steps = spe * cfg.warmup_epochs;

  data::BatchConfig bc;
  bc.batch_size = cfg.batch_size;
  bc.mask_ratio = cfg.mask_ratio;
  bc.token_count = mc.tokens();
  bc.paired_fraction = cfg.paired_fraction;
  bc.hflip = cfg.hflip;
  bc.steps_per_epoch = spe;

  AdamWState opt;
  std::size_t start_step = 0;
  if (!cfg.resume.empty()) {
    std::map<std::string, std::string> meta;
    std::map<std::string, Tensor> extra;
    model::ModelState loaded = model::load_model(cfg.resume, &meta, &extra);
    if (meta["train.fingerprint"] != cfg.fingerprint())
      fail(ErrorKind::contract,
           "train: resume checkpoint was produced by a different config");
    m = loaded;
    start_step = std::stoull(meta.at("train.step"));
    opt.t = std::stoull(meta.at("train.opt_t"));
    for (const auto& [name, _] : m.named_params()) {
      auto it_m = extra.find("opt." + name + ".m");
      auto it_v = extra.find("opt." + name + ".v");
      if (it_m != extra.end() && it_v != extra.end())
        opt.moments[name] = {it_m->second.data(), it_v->second.data()};
    }
  }

  std::ofstream metrics_file;
  std::string metrics_path, checkpoint_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    metrics_path = cfg.out_dir + "/metrics.csv";
    metrics_file.open(metrics_path, start_step ? std::ios::app : std::ios::out);
    if (!metrics_file) fail(ErrorKind::io, "cannot write " + metrics_path);
    if (start_step == 0) metrics_file << metrics_csv_header() << '\n';
  }

  std::vector<StepRecord> metrics;
  auto params = m.named_params();
  for (std::size_t step = start_step; step < total_steps; ++step) {
    data::Batch batch = data::make_batch(reg, bc, &stats, cfg.seed, step);
    objectives::LossBreakdown loss =
        objectives::total_loss(batch, m, teacher, cfg.objectives);
    numcore::backward(loss.total);

    double lr = lr_schedule(step, total_steps, warmup_steps, cfg.base_lr);
    adamw_step(params, opt, lr, cfg);
    for (auto& [name, p] : params) p.zero_grad();

    StepRecord rec;
    rec.step = step;
    rec.epoch = step / spe;
    rec.lr = lr;
    rec.l_mae = loss.l_mae.at(0);
    rec.l_okd = loss.l_okd.at(0);
    rec.l_ccl = loss.l_ccl.at(0);
    rec.l_cdr = loss.l_cdr.at(0);
    rec.total = loss.total.at(0);
    rec.paired = loss.paired;
    metrics.push_back(rec);
    if (metrics_file) metrics_file << metrics_csv_row(rec) << '\n';

    bool epoch_end = (step + 1) % spe == 0;
    if (epoch_end && cfg.checkpoint_every_epochs && !cfg.out_dir.empty()) {
      std::size_t epoch = rec.epoch + 1;
      if (epoch % cfg.checkpoint_every_epochs == 0 && epoch < cfg.epochs) {
        save_state(cfg.out_dir + "/ckpt_epoch_" + std::to_string(epoch) + ".cdmf",
                   m, cfg, opt, step + 1, epoch, metrics);
      }
    }
  }

  if (!cfg.out_dir.empty()) {
    checkpoint_path = cfg.out_dir + "/model_final.cdmf";
    save_state(checkpoint_path, m, cfg, opt, total_steps, cfg.epochs, metrics);
  }
  return TrainResult{std::move(m), std::move(metrics), metrics_path,
                     checkpoint_path};
}

}  // namespace codemae::trainer
