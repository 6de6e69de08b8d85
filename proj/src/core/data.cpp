// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/png_io.hpp"

namespace codemae::data {

using numcore::DType;
using numcore::ErrorKind;
using numcore::fail;

namespace {

// stream tags for seed derivation
constexpr std::uint64_t kTagScene = 1, kTagOptical = 2, kTagSar = 3,
                        kTagBatch = 4, kTagMask = 5, kTagFlip = 6,
                        kTagRecord = 7;

constexpr double kLumR = 0.299, kLumG = 0.587, kLumB = 0.114;

}  // namespace

Scene gen_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                int region_count, int class_count) {
  if (region_count < 2)
    fail(ErrorKind::contract, "gen_scene: region_count must be >= 2");
  Rng rng(seed);
  Scene s;
  s.height = height;
  s.width = width;
  s.seed = seed;
  s.region_count = region_count;
  s.region.assign(height * width, 0);
  s.region_class.resize(region_count);
  for (auto& c : s.region_class)
    c = static_cast<int>(rng() % static_cast<std::uint64_t>(class_count));

  // layered random shapes, last drawn wins
  for (int r = 1; r < region_count; ++r) {
    bool ellipse = (rng() % 2) == 0;
    double cx = uniform(rng, 0.0, static_cast<double>(width));
    double cy = uniform(rng, 0.0, static_cast<double>(height));
    double rx = uniform(rng, width * 0.08, width * 0.35);
    double ry = uniform(rng, height * 0.08, height * 0.35);
    double angle = uniform(rng, 0.0, 3.14159265358979323846);
    double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double dx = (static_cast<double>(x) - cx);
        double dy = (static_cast<double>(y) - cy);
        double u = dx * ca + dy * sa;
        double v = -dx * sa + dy * ca;
        bool inside = ellipse
                          ? (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0
                          : std::fabs(u) <= rx && std::fabs(v) <= ry;
        if (inside) s.region[y * width + x] = r;
      }
  }

  s.edges.assign(height * width, 0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      int id = s.region[y * width + x];
      bool edge = (x + 1 < width && s.region[y * width + x + 1] != id) ||
                  (y + 1 < height && s.region[(y + 1) * width + x] != id);
      s.edges[y * width + x] = edge ? 1 : 0;
    }

  std::vector<std::size_t> area(region_count, 0);
  for (int id : s.region) area[id]++;
  std::size_t best = std::distance(
      area.begin(), std::max_element(area.begin(), area.end()));
  s.label = s.region_class[best];
  return s;
}

namespace {

// Smooth low-frequency field via bilinear interpolation of a coarse grid.
std::vector<double> smooth_noise(Rng& rng, std::size_t h, std::size_t w,
                                 std::size_t cells, double sigma) {
  std::size_t gh = cells + 1, gw = cells + 1;
  std::vector<double> grid(gh * gw);
  for (auto& v : grid) v = normal(rng, 0.0, sigma);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double fy = static_cast<double>(y) / h * cells;
      double fx = static_cast<double>(x) / w * cells;
      std::size_t y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
      double ty = fy - y0, tx = fx - x0;
      double a = grid[y0 * gw + x0], b = grid[y0 * gw + x0 + 1];
      double c = grid[(y0 + 1) * gw + x0], d = grid[(y0 + 1) * gw + x0 + 1];
      out[y * w + x] = a * (1 - ty) * (1 - tx) + b * (1 - ty) * tx +
                       c * ty * (1 - tx) + d * ty * tx;
    }
  return out;
}

// Class palettes: appearance in both modalities is driven by the region
// class so probe labels are recoverable from structure, not just mean color.
struct ClassLook {
  double r, g, b;        // optical base color
  double tex_freq;       // chromatic texture frequency (cycles/pixel)
  double tex_angle;
  double backscatter;    // SAR mean amplitude
};

ClassLook class_look(int cls) {
  static const ClassLook table[] = {
      {0.30, 0.45, 0.25, 0.22, 0.3, 0.25},
      {0.45, 0.40, 0.30, 0.10, 1.2, 0.55},
      {0.25, 0.30, 0.45, 0.30, 2.1, 0.12},
      {0.50, 0.48, 0.42, 0.05, 0.7, 0.80},
      {0.38, 0.28, 0.30, 0.16, 1.7, 0.40},
      {0.28, 0.42, 0.44, 0.26, 2.6, 0.65},
  };
  return table[cls % 6];
}

}  // namespace

Tensor render_optical(const Scene& scene, std::uint64_t seed,
                      const OpticalParams& params) {
  Rng rng(mix_seed(seed, kTagOptical));
  std::size_t h = scene.height, w = scene.width;
  // per-region color jitter
  std::vector<std::array<double, 3>> base(scene.region_count);
  std::vector<double> freq(scene.region_count), ang(scene.region_count),
      phase(scene.region_count);
  for (int r = 0; r < scene.region_count; ++r) {
    ClassLook look = class_look(scene.region_class[r]);
    for (int c = 0; c < 3; ++c)
      base[r][static_cast<std::size_t>(c)] =
          (c == 0 ? look.r : c == 1 ? look.g : look.b) +
          normal(rng, 0.0, 0.04);
    freq[r] = look.tex_freq * uniform(rng, 0.85, 1.15);
    ang[r] = look.tex_angle + normal(rng, 0.0, 0.1);
    phase[r] = uniform(rng, 0.0, 6.28318530717958647692);
  }
  auto noise_r = smooth_noise(rng, h, w, 4, params.noise_sigma);
  auto noise_g = smooth_noise(rng, h, w, 4, params.noise_sigma);
  auto noise_b = smooth_noise(rng, h, w, 4, params.noise_sigma);

  bool cloud = uniform(rng) < params.cloud_prob;
  double ccx = uniform(rng, 0.0, static_cast<double>(w));
  double ccy = uniform(rng, 0.0, static_cast<double>(h));
  double crad = uniform(rng, w * 0.1, w * 0.3);

  std::vector<double> px(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      int r = scene.region[y * w + x];
      double u = x * std::cos(ang[r]) + y * std::sin(ang[r]);
      double tex = params.texture_amp * std::sin(6.28318530717958647692 *
                                                     freq[r] * u +
                                                 phase[r]);
      double vals[3] = {base[r][0] + tex + noise_r[y * w + x],
                        base[r][1] + tex * 0.6 + noise_g[y * w + x],
                        base[r][2] - tex * 0.4 + noise_b[y * w + x]};
      if (cloud) {
        double d2 = (x - ccx) * (x - ccx) + (y - ccy) * (y - ccy);
        double mask = std::exp(-d2 / (2.0 * crad * crad));
        for (double& v : vals) v = v * (1 - mask) + 0.95 * mask;
      }
      for (int c = 0; c < 3; ++c)
        px[static_cast<std::size_t>(c) * h * w + y * w + x] =
            std::clamp(vals[c], 0.0, 1.0);
    }
  return Tensor::from_data({3, h, w}, std::move(px), DType::f32);
}

Tensor render_sar(const Scene& scene, std::uint64_t seed,
                  const SarParams& params) {
  Rng rng(mix_seed(seed, kTagSar));
  std::size_t h = scene.height, w = scene.width;
  std::vector<double> back(scene.region_count);
  for (int r = 0; r < scene.region_count; ++r)
    back[r] = std::clamp(class_look(scene.region_class[r]).backscatter *
                             uniform(rng, 0.8, 1.2),
                         0.05, 1.0);

  std::vector<int> region = scene.region;
  if (params.perturb_region && scene.region_count > 1) {
    // dilate one random region by a pixel ring (temporal asynchrony)
    int target = 1 + static_cast<int>(rng() % (scene.region_count - 1));
    std::vector<int> grown = region;
    for (std::size_t y = 1; y + 1 < h; ++y)
      for (std::size_t x = 1; x + 1 < w; ++x)
        if (region[y * w + x] != target &&
            (region[y * w + x - 1] == target || region[y * w + x + 1] == target ||
             region[(y - 1) * w + x] == target || region[(y + 1) * w + x] == target))
          grown[y * w + x] = target;
    region = std::move(grown);
  }

  double az = params.azimuth_deg * 3.14159265358979323846 / 180.0;
  double dx = std::cos(az), dy = std::sin(az);

  std::vector<double> intensity(h * w);
  std::gamma_distribution<double> gamma(params.looks, 1.0 / params.looks);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double a = back[region[y * w + x]];
      // side-looking shading: brighten slopes facing the sensor
      double ahead = a;
      long xs = static_cast<long>(std::lround(x + 2 * dx));
      long ys = static_cast<long>(std::lround(y + 2 * dy));
      if (xs >= 0 && ys >= 0 && xs < static_cast<long>(w) &&
          ys < static_cast<long>(h))
        ahead = back[region[ys * w + xs]];
      double shade = 1.0 + params.shading * (ahead - a);
      double mult = params.speckle ? gamma(rng) : 1.0;
      intensity[y * w + x] = std::max(a * shade * mult, 1e-6);
    }

  double lo = 1e300, hi = -1e300;
  for (auto& v : intensity) {
    v = std::log(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = std::max(hi - lo, 1e-12);
  for (auto& v : intensity) v = (v - lo) / span;
  return Tensor::from_data({1, h, w}, std::move(intensity), DType::f32);
}

Tensor luminance(const Tensor& optical) {
  if (optical.rank() != 3 || optical.dim(0) != 3)
    fail(ErrorKind::shape, "luminance: [3,H,W] input required");
  std::size_t hw = optical.dim(1) * optical.dim(2);
  std::vector<double> out(hw);
  for (std::size_t i = 0; i < hw; ++i)
    out[i] = kLumR * optical.at(i) + kLumG * optical.at(hw + i) +
             kLumB * optical.at(2 * hw + i);
  return Tensor::from_data({1, optical.dim(1), optical.dim(2)}, std::move(out),
                           optical.dtype());
}

MaskPlan make_mask(std::size_t token_count, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0))
    fail(ErrorKind::contract, "make_mask: ratio must lie in (0,1)");
  auto masked_n = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(token_count)));
  if (masked_n == 0 || masked_n == token_count)
    fail(ErrorKind::contract, "make_mask: degenerate mask at this ratio");
  std::vector<std::size_t> perm(token_count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  MaskPlan plan;
  plan.token_count = token_count;
  plan.ratio = ratio;
  plan.m.assign(token_count, 0);
  plan.visible.assign(perm.begin(), perm.end() - masked_n);
  plan.masked.assign(perm.end() - masked_n, perm.end());
  for (auto i : plan.masked) plan.m[i] = 1;
  return plan;
}

// ---- normalization ----

const ChannelStats& NormStats::get(const std::string& dataset_id,
                                   const std::string& modality) const {
  auto it = entries.find({dataset_id, modality});
  if (it == entries.end())
    fail(ErrorKind::contract,
         "NormStats: no entry for " + dataset_id + "/" + modality);
  return it->second;
}

NormStats fit_norm_stats(
    const std::map<std::pair<std::string, std::string>, std::vector<Tensor>>&
        samples) {
  NormStats out;
  for (const auto& [key, imgs] : samples) {
    if (imgs.empty())
      fail(ErrorKind::contract, "fit_norm_stats: empty sample set");
    std::size_t channels = imgs.front().dim(0);
    ChannelStats st;
    st.mean.assign(channels, 0.0);
    st.stddev.assign(channels, 0.0);
    std::vector<double> sq(channels, 0.0);
    std::vector<std::size_t> n(channels, 0);
    for (const auto& img : imgs) {
      std::size_t hw = img.dim(1) * img.dim(2);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < hw; ++i) {
          double v = img.at(c * hw + i);
          st.mean[c] += v;
          sq[c] += v * v;
          n[c]++;
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
      st.mean[c] /= static_cast<double>(n[c]);
      double var = sq[c] / static_cast<double>(n[c]) - st.mean[c] * st.mean[c];
      if (var < 1e-12)
        fail(ErrorKind::contract,
             "fit_norm_stats: zero-variance channel in " + key.first + "/" +
                 key.second);
      st.stddev[c] = std::sqrt(var);
    }
    out.entries[key] = std::move(st);
  }
  return out;
}

Tensor normalize(const Tensor& image, const ChannelStats& stats) {
  std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
  if (stats.mean.size() != c)
    fail(ErrorKind::shape, "normalize: channel count mismatch");
  std::vector<double> out(image.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i)
      out[ch * hw + i] = (image.at(ch * hw + i) - stats.mean[ch]) / stats.stddev[ch];
  return Tensor::from_data(image.shape(), std::move(out), image.dtype());
}

Tensor denormalize(const Tensor& image, const ChannelStats& stats) {
  std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
  std::vector<double> out(image.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i)
      out[ch * hw + i] = image.at(ch * hw + i) * stats.stddev[ch] + stats.mean[ch];
  return Tensor::from_data(image.shape(), std::move(out), image.dtype());
}

void NormStats::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::io, "cannot write norm stats: " + path);
  f << "dataset_id\tmodality\tchannel\tmean\tstd\n";
  char buf[128];
  for (const auto& [key, st] : entries)
    for (std::size_t c = 0; c < st.mean.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g\t%.17g", st.mean[c], st.stddev[c]);
      f << key.first << '\t' << key.second << '\t' << c << '\t' << buf << '\n';
    }
}

NormStats NormStats::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::io, "cannot read norm stats: " + path);
  NormStats out;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string ds, mod;
    std::size_t ch;
    double mean, dev;
    if (!(std::getline(ss, ds, '\t') && std::getline(ss, mod, '\t') &&
          (ss >> ch >> mean >> dev)))
      fail(ErrorKind::io, "malformed norm stats line: " + line);
    auto& st = out.entries[{ds, mod}];
    if (st.mean.size() <= ch) {
      st.mean.resize(ch + 1);
      st.stddev.resize(ch + 1);
    }
    st.mean[ch] = mean;
    st.stddev[ch] = dev;
  }
  return out;
}

// ---- registry ----

void Registry::index_pools() {
  paired_pool.clear();
  unpaired_optical.clear();
  unpaired_sar.clear();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.paired)
      paired_pool.push_back(i);
    else if (r.has_optical)
      unpaired_optical.push_back(i);
    else
      unpaired_sar.push_back(i);
  }
}

Registry make_synth_registry(std::size_t pairs, std::size_t unpaired,
                             std::uint64_t seed, const SynthConfig& cfg) {
  Registry reg;
  reg.synth = cfg;
  for (std::size_t i = 0; i < pairs + unpaired; ++i) {
    SampleRecord rec;
    rec.dataset_id = "synth";
    rec.sample_id = "s" + std::to_string(i);
    rec.synth_seed = mix_seed(seed, kTagRecord, i);
    if (i < pairs) {
      rec.paired = true;
    } else {
      rec.paired = false;
      bool optical = ((i - pairs) % 2) == 0;
      rec.has_optical = optical;
      rec.has_sar = !optical;
    }
    Scene sc = gen_scene(mix_seed(*rec.synth_seed, kTagScene), cfg.height,
                         cfg.width, cfg.region_count, cfg.class_count);
    rec.label = sc.label;
    reg.records.push_back(std::move(rec));
  }
  reg.index_pools();
  return reg;
}

Registry load_image_dir(const std::string& root, const std::string& manifest) {
  std::string manifest_path =
      (!manifest.empty() && manifest[0] == '/') ? manifest
                                                : root + "/" + manifest;
  std::ifstream f(manifest_path);
  if (!f) fail(ErrorKind::io, "cannot read manifest: " + manifest_path);
  Registry reg;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> cols;
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 5)
      fail(ErrorKind::io, "manifest row needs >= 5 columns: " + line);
    SampleRecord rec;
    rec.dataset_id = cols[0];
    rec.sample_id = cols[1];
    if (cols[2] != "-") rec.optical_path = root + "/" + cols[2];
    if (cols[3] != "-") rec.sar_path = root + "/" + cols[3];
    rec.paired = cols[4] == "1";
    rec.has_optical = rec.optical_path.has_value();
    rec.has_sar = rec.sar_path.has_value();
    if (cols.size() >= 6 && cols[5] != "-") rec.label = std::stoi(cols[5]);
    if (rec.paired && (!rec.has_optical || !rec.has_sar))
      fail(ErrorKind::io, "paired manifest row missing a path: " + rec.sample_id);
    if (!rec.has_optical && !rec.has_sar)
      fail(ErrorKind::io, "manifest row has no images: " + rec.sample_id);
    reg.records.push_back(std::move(rec));
  }
  reg.index_pools();
  return reg;
}

namespace {

Tensor hflip_image(const Tensor& img) {
  std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  std::vector<double> out(img.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out[ch * h * w + y * w + x] = img.at(ch * h * w + y * w + (w - 1 - x));
  return Tensor::from_data(img.shape(), std::move(out), img.dtype());
}

Tensor image_to_tensor(const pngio::Image& img, std::size_t want_channels,
                       const std::string& sample_id) {
  std::size_t hw = img.width * img.height;
  std::vector<double> v;
  if (img.channels == want_channels) {
    v = img.pixels;
  } else if (img.channels == 1 && want_channels == 3) {
    v.resize(3 * hw);
    for (std::size_t c = 0; c < 3; ++c)
      std::copy_n(img.pixels.begin(), hw, v.begin() + c * hw);
  } else if (img.channels == 3 && want_channels == 1) {
    v.resize(hw);
    for (std::size_t i = 0; i < hw; ++i)
      v[i] = kLumR * img.pixels[i] + kLumG * img.pixels[hw + i] +
             kLumB * img.pixels[2 * hw + i];
  } else {
    fail(ErrorKind::io, "unsupported channel layout for " + sample_id);
  }
  return Tensor::from_data({want_channels, img.height, img.width},
                           std::move(v), DType::f32);
}

}  // namespace

Sample materialize(const Registry& reg, std::size_t index,
                   const NormStats* stats, bool hflip) {
  const SampleRecord& rec = reg.records.at(index);
  Sample out;
  out.label = rec.label;
  out.dataset_id = rec.dataset_id;
  out.sample_id = rec.sample_id;

  if (rec.synth_seed) {
    Scene sc = gen_scene(mix_seed(*rec.synth_seed, kTagScene),
                         reg.synth.height, reg.synth.width,
                         reg.synth.region_count, reg.synth.class_count);
    if (rec.has_optical)
      out.optical = render_optical(sc, mix_seed(*rec.synth_seed, kTagOptical),
                                   reg.synth.optical);
    if (rec.has_sar)
      out.sar = render_sar(sc, mix_seed(*rec.synth_seed, kTagSar),
                           reg.synth.sar);
  } else {
    if (rec.optical_path)
      out.optical = image_to_tensor(pngio::load_png(*rec.optical_path), 3,
                                    rec.sample_id);
    if (rec.sar_path)
      out.sar = image_to_tensor(pngio::load_png(*rec.sar_path), 1,
                                rec.sample_id);
    if (out.optical && out.sar &&
        (out.optical->dim(1) != out.sar->dim(1) ||
         out.optical->dim(2) != out.sar->dim(2)))
      fail(ErrorKind::io,
           "pair dimension mismatch in sample " + rec.sample_id);
  }

  if (hflip) {
    if (out.optical) out.optical = hflip_image(*out.optical);
    if (out.sar) out.sar = hflip_image(*out.sar);
  }
  if (stats) {
    if (out.optical)
      out.optical = normalize(*out.optical, stats->get(rec.dataset_id, "optical"));
    if (out.sar)
      out.sar = normalize(*out.sar, stats->get(rec.dataset_id, "sar"));
  }
  return out;
}

Batch make_batch(const Registry& reg, const BatchConfig& cfg,
                 const NormStats* stats, std::uint64_t seed,
                 std::size_t step) {
  if (reg.records.empty())
    fail(ErrorKind::contract, "make_batch: empty registry");
  Rng rng(mix_seed(seed, kTagBatch, step));

  bool want_paired = uniform(rng) < cfg.paired_fraction;
  if (want_paired && !reg.has_paired()) {
    if (cfg.paired_fraction >= 1.0)
      fail(ErrorKind::contract,
           "make_batch: paired batches requested from an unpaired-only registry");
    want_paired = false;
  }
  if (!want_paired && !reg.has_unpaired()) {
    if (cfg.paired_fraction <= 0.0)
      fail(ErrorKind::contract,
           "make_batch: unpaired batches requested from a paired-only registry");
    want_paired = true;
  }

  Batch batch;
  batch.plan.paired = want_paired;
  batch.plan.step = step;
  batch.plan.epoch = cfg.steps_per_epoch ? step / cfg.steps_per_epoch : 0;

  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    std::size_t idx;
    if (want_paired) {
      idx = reg.paired_pool[rng() % reg.paired_pool.size()];
    } else {
      // optical and SAR samples 1:1 within unpaired batches
      const auto& pool = (i % 2 == 0 && !reg.unpaired_optical.empty()) ||
                                 reg.unpaired_sar.empty()
                             ? reg.unpaired_optical
                             : reg.unpaired_sar;
      idx = pool[rng() % pool.size()];
    }
    batch.plan.sample_indices.push_back(idx);
    Rng mask_rng(mix_seed(seed, kTagMask, step * 1000003 + i));
    batch.plan.masks.push_back(make_mask(cfg.token_count, cfg.mask_ratio, mask_rng));
    bool flip = cfg.hflip &&
                (Rng(mix_seed(seed, kTagFlip, step * 1000003 + i))() % 2) == 0;
    batch.samples.push_back(materialize(reg, idx, stats, flip));
  }
  return batch;
}

NormStats fit_registry_stats(const Registry& reg) {
  std::map<std::pair<std::string, std::string>, std::vector<Tensor>> samples;
  for (std::size_t i = 0; i < reg.records.size(); ++i) {
    Sample s = materialize(reg, i, nullptr, false);
    if (s.optical) samples[{s.dataset_id, "optical"}].push_back(*s.optical);
    if (s.sar) samples[{s.dataset_id, "sar"}].push_back(*s.sar);
  }
  return fit_norm_stats(samples);
}

GenDataResult generate_dataset(const std::string& out_dir, std::size_t scenes,
                               std::size_t size, std::uint64_t seed,
                               double unpaired_fraction,
                               const SynthConfig& cfg_in) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    fail(ErrorKind::io, "cannot create output directory: " + out_dir);

  SynthConfig cfg = cfg_in;
  cfg.height = cfg.width = size;
  auto n_unpaired = static_cast<std::size_t>(
      std::llround(unpaired_fraction * static_cast<double>(scenes)));
  std::size_t n_paired = scenes - n_unpaired;
  Registry reg = make_synth_registry(n_paired, n_unpaired, seed, cfg);

  std::ofstream manifest(out_dir + "/manifest.tsv");
  if (!manifest) fail(ErrorKind::io, "cannot write manifest");
  GenDataResult res;
  for (std::size_t i = 0; i < reg.records.size(); ++i) {
    const auto& rec = reg.records[i];
    Sample s = materialize(reg, i, nullptr, false);
    std::string opt = "-", sar = "-";
    auto dump = [&](const Tensor& img, const std::string& stem) {
      pngio::Image out;
      out.width = img.dim(2);
      out.height = img.dim(1);
      out.channels = img.dim(0);
      out.pixels = img.data();
      pngio::save_png16(out_dir + "/" + stem, out);
    };
    if (s.optical) {
      opt = rec.sample_id + "_opt.png";
      dump(*s.optical, opt);
    }
    if (s.sar) {
      sar = rec.sample_id + "_sar.png";
      dump(*s.sar, sar);
    }
    manifest << rec.dataset_id << '\t' << rec.sample_id << '\t' << opt << '\t'
             << sar << '\t' << (rec.paired ? 1 : 0) << '\t' << rec.label
             << '\n';
    if (rec.paired)
      res.paired_rows++;
    else
      res.unpaired_rows++;
  }
  manifest.close();

  NormStats stats = fit_registry_stats(reg);
  res.manifest_path = out_dir + "/manifest.tsv";
  res.stats_path = out_dir + "/norm_stats.tsv";
  stats.save(res.stats_path);
  return res;
}

}  // namespace codemae::data
