// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/runners.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "core/diagnostics.hpp"
#include "core/objectives.hpp"
#include "core/rng.hpp"
#include "core/svg.hpp"

namespace codemae::runners {

using numcore::DType;
using numcore::ErrorKind;
using numcore::fail;
using numcore::Tensor;

std::size_t thread_budget() {
  const char* env = std::getenv("CODEMAE_THREADS");
  if (!env) return 1;
  long v = std::strtol(env, nullptr, 10);
  return v < 1 ? 1 : static_cast<std::size_t>(v);
}

trainer::TrainConfig train_config_from(config::Config& c) {
  trainer::TrainConfig t;
  t.model.image_size = c.get_u64("model.image_size", t.model.image_size);
  t.model.patch = c.get_u64("model.patch", t.model.patch);
  t.model.width = c.get_u64("model.width", t.model.width);
  t.model.decoder_width = c.get_u64("model.decoder_width", t.model.width);
  t.model.heads = c.get_u64("model.heads", t.model.heads);
  t.model.encoder_depth = c.get_u64("model.encoder_depth", t.model.encoder_depth);
  t.model.decoder_depth = c.get_u64("model.decoder_depth", t.model.decoder_depth);
  t.model.cdr_depth = c.get_u64("model.cdr_depth", t.model.cdr_depth);
  t.model.mlp_ratio = c.get_u64("model.mlp_ratio", t.model.mlp_ratio);
  std::string dtype = c.get_string("model.dtype", "f32");
  if (dtype == "f32")
    t.model.dtype = DType::f32;
  else if (dtype == "f64")
    t.model.dtype = DType::f64;
  else
    fail(ErrorKind::usage, "model.dtype must be f32 or f64");

  t.objectives.enable_okd = c.get_bool("enable_okd", true);
  t.objectives.enable_ccl = c.get_bool("enable_ccl", true);
  t.objectives.enable_cdr = c.get_bool("enable_cdr", true);
  t.objectives.rigid_contrastive =
      c.get_bool("rigid_contrastive_baseline", false);
  t.objectives.tau = c.get_f64("tau", t.objectives.tau);
  t.objectives.degradation =
      model::parse_degradation_mode(c.get_string("degradation", "grayscale"));
  t.objectives.literal_patch_norm = c.get_bool("literal_patch_norm", false);
  t.objectives.literal_ccl_sum = c.get_bool("literal_ccl_sum", false);

  t.epochs = c.get_u64("epochs", t.epochs);
  t.warmup_epochs = c.get_u64("warmup_epochs", t.warmup_epochs);
  t.batch_size = c.get_u64("batch_size", t.batch_size);
  t.base_lr = c.get_f64("base_lr", t.base_lr);
  t.weight_decay = c.get_f64("weight_decay", t.weight_decay);
  t.beta1 = c.get_f64("beta1", t.beta1);
  t.beta2 = c.get_f64("beta2", t.beta2);
  t.adam_eps = c.get_f64("adam_eps", t.adam_eps);
  t.grad_clip = c.get_f64("grad_clip", 0.0);
  t.mask_ratio = c.get_f64("mask_ratio", t.mask_ratio);
  t.paired_fraction = c.get_f64("paired_fraction", t.paired_fraction);
  t.hflip = c.get_bool("hflip", true);
  t.seed = c.get_u64("seed", 0);
  t.steps_per_epoch = c.get_u64("steps_per_epoch", 0);
  t.checkpoint_every_epochs = c.get_u64("checkpoint_every_epochs", 0);
  t.synth_pairs = c.get_u64("synth_pairs", t.synth_pairs);
  t.synth_unpaired = c.get_u64("synth_unpaired", t.synth_unpaired);
  t.synth_sar_perturb = c.get_bool("synth_sar_perturb", t.synth_sar_perturb);
  t.synth_cloud_prob = c.get_f64("synth_cloud_prob", t.synth_cloud_prob);
  t.synth_texture_amp = c.get_f64("synth_texture_amp", t.synth_texture_amp);
  t.data_dir = c.get_string("data_dir", "");
  t.data_manifest = c.get_string("data_manifest", "");
  t.teacher_features_path = c.get_string("teacher_features", "");
  t.teacher_width = c.get_u64("teacher_width", 0);
  c.finish();
  return t;
}

namespace {

std::string render_train_config(const trainer::TrainConfig& t) {
  char buf[512];
  std::string s;
  auto kv = [&s, &buf](const char* k, const std::string& v) {
    (void)buf;
    s += std::string(k) + "=" + v + "\n";
  };
  auto kf = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    kv(k, buf);
  };
  kv("model.image_size", std::to_string(t.model.image_size));
  kv("model.patch", std::to_string(t.model.patch));
  kv("model.width", std::to_string(t.model.width));
  kv("model.decoder_width", std::to_string(t.model.decoder_width));
  kv("model.heads", std::to_string(t.model.heads));
  kv("model.encoder_depth", std::to_string(t.model.encoder_depth));
  kv("model.decoder_depth", std::to_string(t.model.decoder_depth));
  kv("model.cdr_depth", std::to_string(t.model.cdr_depth));
  kv("model.mlp_ratio", std::to_string(t.model.mlp_ratio));
  kv("model.dtype", t.model.dtype == DType::f32 ? "f32" : "f64");
  kv("enable_okd", t.objectives.enable_okd ? "true" : "false");
  kv("enable_ccl", t.objectives.enable_ccl ? "true" : "false");
  kv("enable_cdr", t.objectives.enable_cdr ? "true" : "false");
  kv("rigid_contrastive_baseline",
     t.objectives.rigid_contrastive ? "true" : "false");
  kf("tau", t.objectives.tau);
  kv("degradation", model::degradation_mode_name(t.objectives.degradation));
  kv("literal_patch_norm", t.objectives.literal_patch_norm ? "true" : "false");
  kv("literal_ccl_sum", t.objectives.literal_ccl_sum ? "true" : "false");
  kv("epochs", std::to_string(t.epochs));
  kv("warmup_epochs", std::to_string(t.warmup_epochs));
  kv("batch_size", std::to_string(t.batch_size));
  kf("base_lr", t.base_lr);
  kf("weight_decay", t.weight_decay);
  kf("beta1", t.beta1);
  kf("beta2", t.beta2);
  kf("adam_eps", t.adam_eps);
  kf("grad_clip", t.grad_clip);
  kf("mask_ratio", t.mask_ratio);
  kf("paired_fraction", t.paired_fraction);
  kv("hflip", t.hflip ? "true" : "false");
  kv("seed", std::to_string(t.seed));
  kv("steps_per_epoch", std::to_string(t.steps_per_epoch));
  kv("checkpoint_every_epochs", std::to_string(t.checkpoint_every_epochs));
  kv("synth_pairs", std::to_string(t.synth_pairs));
  kv("synth_unpaired", std::to_string(t.synth_unpaired));
  kv("synth_sar_perturb", t.synth_sar_perturb ? "true" : "false");
  kf("synth_cloud_prob", t.synth_cloud_prob);
  kf("synth_texture_amp", t.synth_texture_amp);
  kv("data_dir", t.data_dir);
  kv("data_manifest", t.data_manifest);
  kv("teacher_features", t.teacher_features_path);
  kv("teacher_width", std::to_string(t.teacher_width));
  return s;
}

}  // namespace

void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const std::string& resolved_config) {
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir + "/run_manifest.txt");
  if (!f) fail(ErrorKind::io, "cannot write run manifest in " + out_dir);
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                  now.time_since_epoch())
                  .count();
  f << "command: " << command << "\n";
  f << "version: codemae-0.1.0\n";
  f << "timestamp_unix: " << secs << "\n";
  f << "threads: " << thread_budget() << "\n";
  f << "--- resolved config ---\n";
  f << resolved_config;
}

void run_gen_data(const std::string& out_dir, std::size_t scenes,
                  std::size_t size, std::uint64_t seed,
                  double unpaired_fraction) {
  if (unpaired_fraction < 0.0 || unpaired_fraction > 1.0)
    fail(ErrorKind::usage, "gen-data: unpaired fraction must be in [0,1]");
  if (scenes == 0) fail(ErrorKind::usage, "gen-data: scene count must be > 0");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "scenes=%zu\nsize=%zu\nseed=%llu\nunpaired_fraction=%.17g\n",
                scenes, size, static_cast<unsigned long long>(seed),
                unpaired_fraction);
  write_run_manifest(out_dir, "gen-data", buf);
  data::SynthConfig sc;
  sc.height = size;
  sc.width = size;
  data::generate_dataset(out_dir, scenes, size, seed, unpaired_fraction, sc);
}

trainer::TrainResult run_pretrain(config::Config& c,
                                  const std::string& out_dir) {
  trainer::TrainConfig t = train_config_from(c);
  t.out_dir = out_dir;
  if (!out_dir.empty())
    write_run_manifest(out_dir, "pretrain", render_train_config(t));
  return trainer::train(t);
}

namespace {

struct EvalSet {
  data::Registry reg;
  data::NormStats stats;
  std::vector<data::Sample> raw_pairs;         // un-normalized, paired only
  std::vector<data::Sample> normalized_pairs;  // same order
};

EvalSet make_eval_set(const std::string& data_dir, std::uint64_t seed,
                      std::size_t samples, std::size_t image_size) {
  EvalSet e;
  if (data_dir.empty()) {
    data::SynthConfig sc;
    sc.height = image_size;
    sc.width = image_size;
    e.reg = data::make_synth_registry(samples, 0, mix_seed(seed, 0xe7a1ULL), sc);
  } else {
    e.reg = data::load_image_dir(data_dir, "manifest.tsv");
  }
  e.stats = data::fit_registry_stats(e.reg);
  std::size_t taken = 0;
  for (std::size_t i = 0; i < e.reg.records.size() && taken < samples; ++i) {
    if (!e.reg.records[i].paired || !e.reg.records[i].has_optical ||
        !e.reg.records[i].has_sar)
      continue;
    e.raw_pairs.push_back(data::materialize(e.reg, i, nullptr, false));
    e.normalized_pairs.push_back(data::materialize(e.reg, i, &e.stats, false));
    taken++;
  }
  if (e.raw_pairs.empty())
    fail(ErrorKind::usage, "diagnose: no paired samples in the data set");
  return e;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

void run_diagnose(const std::string& checkpoint, const std::string& data_dir,
                  const std::string& out_dir, const std::string& which,
                  std::uint64_t seed, std::size_t samples) {
  if (which != "spectrum" && which != "curve" && which != "alignment" &&
      which != "pca")
    fail(ErrorKind::usage, "diagnose: unknown report '" + which +
                               "' (expected spectrum|curve|alignment|pca)");
  model::ModelState m = model::load_model(checkpoint);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "checkpoint=%s\ndata_dir=%s\nwhich=%s\nseed=%llu\nsamples=%zu\n",
                checkpoint.c_str(), data_dir.c_str(), which.c_str(),
                static_cast<unsigned long long>(seed), samples);
  write_run_manifest(out_dir, "diagnose", buf);
  EvalSet e = make_eval_set(data_dir, seed, samples, m.config.image_size);

  if (which == "spectrum") {
    // token embeddings across samples and modalities, one matrix
    std::size_t mm = m.config.tokens(), d = m.config.width;
    std::vector<double> rows;
    rows.reserve(2 * e.normalized_pairs.size() * mm * d);
    for (const auto& s : e.normalized_pairs)
      for (auto [img, mod] :
           {std::pair<const Tensor*, model::Modality>{&*s.optical,
                                                      model::Modality::optical},
            {&*s.sar, model::Modality::sar}}) {
        data::MaskPlan dense;
        dense.token_count = mm;
        dense.m.assign(mm, 0);
        dense.visible.resize(mm);
        for (std::size_t i = 0; i < mm; ++i) dense.visible[i] = i;
        Tensor tok = model::encode_visible(m, *img, mod, dense).detached();
        rows.insert(rows.end(), tok.data().begin(), tok.data().end());
      }
    std::size_t row_count = rows.size() / d;
    Tensor matrix =
        Tensor::from_data({row_count, d}, std::move(rows), DType::f64);
    auto report = diagnostics::singular_spectrum(matrix, stem_of(checkpoint));
    diagnostics::write_spectrum_csv(out_dir + "/spectrum.csv", report);
    svg::Series s;
    s.label = report.variant;
    for (std::size_t i = 0; i < report.singular_values.size(); ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(std::max(report.singular_values[i], 1e-12));
    }
    svg::write_chart(out_dir + "/spectrum.svg", "singular value spectrum",
                     "singular value index", "normalized singular value", {s},
                     /*log_y=*/true);
    std::snprintf(buf, sizeof buf, "%.12g", report.effective_rank);
    diagnostics::write_summary_kv(out_dir + "/summary.txt",
                                  {{"effective_rank", buf},
                                   {"variant", report.variant}});
  } else if (which == "curve") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    for (const auto& s : e.raw_pairs) pairs.emplace_back(*s.optical, *s.sar);
    std::size_t levels = 1;
    while (levels < 5 &&
           m.config.image_size % (std::size_t{1} << levels) == 0 &&
           (m.config.image_size >> levels) >= 8)
      levels++;
    auto rows = diagnostics::heterogeneity_curve(pairs, levels);
    diagnostics::write_curve_csv(out_dir + "/curve.csv", rows);
    svg::Series s;
    s.label = "mean ssim";
    for (const auto& r : rows) {
      s.x.push_back(r.equivalent_scale);
      s.y.push_back(r.mean_ssim);
    }
    svg::write_chart(out_dir + "/curve.svg",
                     "cross-modal similarity vs pyramid scale",
                     "downscale factor", "mean SSIM", {s});
  } else if (which == "alignment") {
    auto points = diagnostics::alignment_vs_heterogeneity(e.raw_pairs, m,
                                                          &e.stats);
    diagnostics::write_alignment_csv(out_dir + "/alignment.csv", points);
    svg::Series s;
    s.label = "patches";
    s.scatter = true;
    for (const auto& p : points) {
      s.x.push_back(p.patch_ssim);
      s.y.push_back(p.embedding_cosine);
    }
    svg::write_chart(out_dir + "/alignment.svg",
                     "embedding alignment vs input heterogeneity",
                     "patch SSIM (optical vs SAR)", "embedding cosine", {s});
    std::snprintf(buf, sizeof buf, "%.12g", diagnostics::spearman(points));
    diagnostics::write_summary_kv(out_dir + "/summary.txt",
                                  {{"spearman", buf}});
  } else {  // pca
    std::size_t n = e.normalized_pairs.size(), d = m.config.width;
    std::vector<double> rows;
    rows.reserve(2 * n * d);
    for (const auto& s : e.normalized_pairs) {
      Tensor eo = diagnostics::frozen_embedding(m, *s.optical,
                                                model::Modality::optical);
      rows.insert(rows.end(), eo.data().begin(), eo.data().end());
    }
    for (const auto& s : e.normalized_pairs) {
      Tensor es =
          diagnostics::frozen_embedding(m, *s.sar, model::Modality::sar);
      rows.insert(rows.end(), es.data().begin(), es.data().end());
    }
    Tensor matrix = Tensor::from_data({2 * n, d}, std::move(rows), DType::f64);
    Tensor proj = diagnostics::pca_project(matrix, 2);
    std::ofstream csv(out_dir + "/pca.csv");
    if (!csv) fail(ErrorKind::io, "cannot write pca.csv");
    csv << "sample_id,modality,label,pc1,pc2\n";
    svg::Series so, ss;
    so.label = "optical";
    so.scatter = true;
    ss.label = "sar";
    ss.scatter = true;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const auto& smp = e.normalized_pairs[i % n];
      bool optical = i < n;
      std::snprintf(buf, sizeof buf, "%s,%s,%d,%.12g,%.12g",
                    smp.sample_id.c_str(), optical ? "optical" : "sar",
                    smp.label, proj.at(i * 2), proj.at(i * 2 + 1));
      csv << buf << '\n';
      (optical ? so : ss).x.push_back(proj.at(i * 2));
      (optical ? so : ss).y.push_back(proj.at(i * 2 + 1));
    }
    svg::write_chart(out_dir + "/pca.svg", "embedding PCA",
                     "principal component 1", "principal component 2",
                     {so, ss});
  }
}

std::vector<ProbeRow> run_probe(const std::string& checkpoint,
                                const std::string& data_dir,
                                const std::string& out_dir,
                                std::size_t seed_count, std::uint64_t seed,
                                std::size_t samples) {
  if (seed_count == 0) fail(ErrorKind::usage, "probe: need at least one seed");
  model::ModelState m = model::load_model(checkpoint);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "checkpoint=%s\ndata_dir=%s\nseeds=%zu\nseed=%llu\nsamples=%zu\n",
                checkpoint.c_str(), data_dir.c_str(), seed_count,
                static_cast<unsigned long long>(seed), samples);
  if (!out_dir.empty()) write_run_manifest(out_dir, "probe", buf);
  EvalSet e = make_eval_set(data_dir, seed, samples, m.config.image_size);

  std::size_t n = e.normalized_pairs.size(), d = m.config.width;
  std::vector<int> labels;
  for (const auto& s : e.normalized_pairs) {
    if (s.label < 0)
      fail(ErrorKind::usage, "probe: sample " + s.sample_id + " has no label");
    labels.push_back(s.label);
  }
  auto embed_all = [&](model::Modality mod) {
    std::vector<double> rows;
    rows.reserve(n * d);
    for (const auto& s : e.normalized_pairs) {
      Tensor emb = diagnostics::frozen_embedding(
          m, mod == model::Modality::optical ? *s.optical : *s.sar, mod);
      rows.insert(rows.end(), emb.data().begin(), emb.data().end());
    }
    return Tensor::from_data({n, d}, std::move(rows), DType::f64);
  };

  std::vector<ProbeRow> rows;
  for (auto [mod, name] :
       {std::pair<model::Modality, const char*>{model::Modality::optical,
                                                "optical"},
        {model::Modality::sar, "sar"}}) {
    Tensor features = embed_all(mod);
    double sum = 0.0;
    for (std::size_t s = 0; s < seed_count; ++s) {
      diagnostics::ProbeConfig pc;
      pc.seed = mix_seed(seed, 0x9a0beULL, s);
      double acc = diagnostics::linear_probe(features, labels, pc);
      rows.push_back({name, std::to_string(s), acc});
      sum += acc;
    }
    rows.push_back({name, "mean", sum / static_cast<double>(seed_count)});
  }

  if (!out_dir.empty()) {
    std::ofstream csv(out_dir + "/probe.csv");
    if (!csv) fail(ErrorKind::io, "cannot write probe.csv");
    csv << "modality,seed,accuracy\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.12g", r.modality.c_str(),
                    r.seed_label.c_str(), r.accuracy);
      csv << buf << '\n';
    }
  }
  return rows;
}

// ---- gradcheck ----

namespace {

Tensor randn(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v), DType::f64);
}

void add_row(std::vector<GradCheckRow>& rows, const std::string& name,
             double err, double tol) {
  rows.push_back({name, err, tol, err < tol});
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(const std::string& component) {
  if (component != "all" && component != "losses" && component != "layers")
    fail(ErrorKind::usage,
         "gradcheck: unknown component '" + component +
             "' (expected all|losses|layers)");
  bool want_layers = component != "losses";
  bool want_losses = component != "layers";
  constexpr double kTolOp = 1e-4;
  std::vector<GradCheckRow> rows;
  Rng rng(20260826ULL);

  if (want_layers) {
    double err;
    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor a = randn({3, 4}, rng), b = randn({4, 5}, rng);
      err = std::max(err, numcore::grad_check(
                              [](const std::vector<Tensor>& xs) {
                                return numcore::sum(numcore::matmul(xs[0], xs[1]));
                              },
                              {a, b}));
    }
    add_row(rows, "matmul", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor x = randn({2, 6}, rng);
      err = std::max(err, numcore::grad_check(
                              [](const std::vector<Tensor>& xs) {
                                return numcore::sum(numcore::gelu(xs[0]));
                              },
                              {x}));
    }
    add_row(rows, "gelu", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor x = randn({3, 5}, rng);
      Tensor w = randn({3, 5}, rng);
      err = std::max(
          err, numcore::grad_check(
                   [](const std::vector<Tensor>& xs) {
                     return numcore::sum(
                         numcore::mul(numcore::softmax(xs[0]), xs[1]));
                   },
                   {x, w}));
    }
    add_row(rows, "softmax", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor x = randn({3, 6}, rng);
      Tensor g = randn({6}, rng), b2 = randn({6}, rng);
      err = std::max(err, numcore::grad_check(
                              [](const std::vector<Tensor>& xs) {
                                return numcore::sum(numcore::layer_norm(
                                    xs[0], xs[1], xs[2]));
                              },
                              {x, g, b2}));
    }
    add_row(rows, "layer_norm", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor x = randn({3, 4}, rng);
      Tensor w = randn({3, 4}, rng);
      err = std::max(
          err, numcore::grad_check(
                   [](const std::vector<Tensor>& xs) {
                     return numcore::sum(
                         numcore::mul(numcore::l2_normalize(xs[0]), xs[1]));
                   },
                   {x, w}));
    }
    add_row(rows, "l2_normalize", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor x = randn({3, 4}, rng);
      err = std::max(err,
                     numcore::grad_check(
                         [](const std::vector<Tensor>& xs) {
                           return numcore::sum(numcore::logsumexp_rows(xs[0]));
                         },
                         {x}));
    }
    add_row(rows, "logsumexp_rows", err, kTolOp);

    // attention and transformer block through real parameter structs
    err = 0;
    for (int s = 0; s < 2; ++s) {
      Tensor x = randn({3, 4}, rng, 0.5);
      Tensor z = randn({5, 4}, rng, 0.5);
      Tensor wq = randn({4, 4}, rng, 0.3), wk = randn({4, 4}, rng, 0.3),
             wv = randn({4, 4}, rng, 0.3);
      err = std::max(
          err, numcore::grad_check(
                   [](const std::vector<Tensor>& xs) {
                     nn::CaBufferParams p;
                     p.wq = xs[2];
                     p.wk = xs[3];
                     p.wv = xs[4];
                     return numcore::sum(nn::cross_attention(xs[0], xs[1], p));
                   },
                   {x, z, wq, wk, wv}));
    }
    add_row(rows, "cross_attention", err, kTolOp);

    err = 0;
    {
      Rng prng(7);
      nn::BlockParams p = nn::BlockParams::init(4, 2, 8, prng, DType::f64);
      Tensor x = randn({3, 4}, rng, 0.5);
      err = numcore::grad_check(
          [&p](const std::vector<Tensor>& xs) {
            return numcore::sum(nn::transformer_block(xs[0], p));
          },
          {x});
    }
    add_row(rows, "transformer_block", err, kTolOp);
  }

  if (want_losses) {
    data::MaskPlan plan;
    plan.token_count = 4;
    plan.ratio = 0.5;
    plan.m = {1, 0, 1, 0};
    plan.visible = {3, 1};
    plan.masked = {0, 2};

    double err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor ro = randn({4, 6}, rng), rs = randn({4, 2}, rng);
      Tensor po = randn({4, 6}, rng), ps = randn({4, 2}, rng);
      err = std::max(err, numcore::grad_check(
                              [&plan](const std::vector<Tensor>& xs) {
                                return objectives::loss_mae(
                                    xs[0], xs[1], xs[2], xs[3], plan);
                              },
                              {ro, rs, po, ps}));
    }
    add_row(rows, "loss_mae", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor t = randn({2, 5}, rng), x = randn({2, 5}, rng);
      err = std::max(err, numcore::grad_check(
                              [&plan](const std::vector<Tensor>& xs) {
                                return objectives::loss_okd(xs[0], xs[1], plan);
                              },
                              {t, x}));
    }
    add_row(rows, "loss_okd", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      Tensor a = randn({3, 5}, rng), b = randn({3, 5}, rng);
      err = std::max(
          err, numcore::grad_check(
                   [](const std::vector<Tensor>& xs) {
                     return objectives::loss_ccl(numcore::l2_normalize(xs[0]),
                                                 numcore::l2_normalize(xs[1]),
                                                 0.07);
                   },
                   {a, b}));
    }
    add_row(rows, "loss_ccl", err, kTolOp);

    err = 0;
    for (int s = 0; s < 3; ++s) {
      // patch = 2: optical rows carry 3 * p^2 = 12, sar rows p^2 = 4.
      // Targets are detached by design, so only predictions are perturbed.
      Tensor ro = randn({4, 4}, rng), rs = randn({4, 4}, rng);
      Tensor po = randn({4, 12}, rng), ps = randn({4, 4}, rng);
      err = std::max(
          err, numcore::grad_check(
                   [&plan, &po, &ps](const std::vector<Tensor>& xs) {
                     return objectives::loss_cdr(
                         xs[0], xs[1], po, ps, plan, 2,
                         model::DegradationMode::grayscale);
                   },
                   {ro, rs}));
    }
    add_row(rows, "loss_cdr", err, kTolOp);
  }

  if (component == "all") {
    // total objective through a micro model, FD over a parameter subset
    model::ModelConfig mc;
    mc.image_size = 16;
    mc.patch = 8;
    mc.width = 8;
    mc.decoder_width = 8;
    mc.heads = 2;
    mc.encoder_depth = 1;
    mc.decoder_depth = 1;
    mc.cdr_depth = 1;
    mc.mlp_ratio = 2;
    mc.dtype = DType::f64;
    model::ModelState m = model::ModelState::init(mc, 11);
    model::TeacherHandle teacher =
        model::TeacherHandle::frozen_random(mc, 12);
    data::SynthConfig sc;
    sc.height = 16;
    sc.width = 16;
    data::Registry reg = data::make_synth_registry(4, 0, 13, sc);
    data::BatchConfig bc;
    bc.batch_size = 2;
    bc.mask_ratio = 0.5;
    bc.token_count = mc.tokens();
    bc.paired_fraction = 1.0;
    data::Batch batch = data::make_batch(reg, bc, nullptr, 14, 0);
    objectives::ObjectiveConfig oc;

    std::vector<Tensor> subset;
    for (const auto& [name, p] : m.named_params())
      if (name == "ca.wq" || name == "ca.wv" || name == "dec.mask_token" ||
          name == "head.sar.b" || name == "cdr.head.b" ||
          name == "enc.0.attn.q.b")
        subset.push_back(p);
    double err = numcore::grad_check(
        [&](const std::vector<Tensor>&) {
          return objectives::total_loss(batch, m, teacher, oc).total;
        },
        subset, 1e-5);
    add_row(rows, "total_objective", err, 1e-3);
  }

  return rows;
}

}  // namespace codemae::runners
