// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/diagnostics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "core/nn.hpp"

namespace codemae::diagnostics {

using numcore::DType;
using numcore::ErrorKind;
using numcore::fail;

// ---- spectra ----

SpectrumReport singular_spectrum(const Tensor& embeddings,
                                 const std::string& variant) {
  if (embeddings.rank() != 2 || embeddings.dim(0) < 2)
    fail(ErrorKind::shape, "singular_spectrum: [n x D] with n >= 2 required");
  std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = embeddings.at(i * d + j);
  x.rowwise() -= x.colwise().mean();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  Eigen::VectorXd sv = svd.singularValues();

  SpectrumReport report;
  report.token_count = n;
  report.width = d;
  report.variant = variant;
  report.singular_values.resize(sv.size());
  if (sv.size() == 0 || sv(0) < 1e-14) {
    // all rows identical: degenerate rank-1 spectrum
    std::fill(report.singular_values.begin(), report.singular_values.end(), 0.0);
    if (!report.singular_values.empty()) report.singular_values[0] = 1.0;
    report.effective_rank = 1.0;
    return report;
  }
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    report.singular_values[i] = sv(i) / sv(0);
  report.effective_rank = effective_rank(report.singular_values);
  return report;
}

double effective_rank(const std::vector<double>& spectrum) {
  double total = 0.0;
  for (double s : spectrum)
    if (s > 0) total += s;
  if (total <= 0)
    fail(ErrorKind::contract, "effective_rank: no positive singular values");
  double entropy = 0.0;
  for (double s : spectrum)
    if (s > 0) {
      double p = s / total;
      entropy -= p * std::log(p);
    }
  return std::exp(entropy);
}

// ---- SSIM ----

namespace {

void as_plane(const Tensor& t, std::size_t& h, std::size_t& w,
              const double** px) {
  if (t.rank() == 2) {
    h = t.dim(0);
    w = t.dim(1);
  } else if (t.rank() == 3 && t.dim(0) == 1) {
    h = t.dim(1);
    w = t.dim(2);
  } else {
    fail(ErrorKind::shape, "ssim: [H,W] or [1,H,W] input required");
  }
  *px = t.data().data();
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double window_sigma,
            double dynamic_range) {
  std::size_t ha, wa, hb, wb;
  const double *pa, *pb;
  as_plane(a, ha, wa, &pa);
  as_plane(b, hb, wb, &pb);
  if (ha != hb || wa != wb) fail(ErrorKind::shape, "ssim: shape mismatch");

  constexpr int kHalf = 5;  // 11x11 window
  double weights[11][11];
  for (int dy = -kHalf; dy <= kHalf; ++dy)
    for (int dx = -kHalf; dx <= kHalf; ++dx)
      weights[dy + kHalf][dx + kHalf] =
          std::exp(-(dy * dy + dx * dx) / (2.0 * window_sigma * window_sigma));

  double c1 = 0.01 * dynamic_range, c2 = 0.03 * dynamic_range;
  c1 *= c1;
  c2 *= c2;

  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < ha; ++y)
    for (std::size_t x = 0; x < wa; ++x) {
      double wsum = 0, mu_a = 0, mu_b = 0;
      for (int dy = -kHalf; dy <= kHalf; ++dy)
        for (int dx = -kHalf; dx <= kHalf; ++dx) {
          long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(ha) ||
              xx >= static_cast<long>(wa))
            continue;
          double wgt = weights[dy + kHalf][dx + kHalf];
          wsum += wgt;
          mu_a += wgt * pa[yy * wa + xx];
          mu_b += wgt * pb[yy * wa + xx];
        }
      mu_a /= wsum;
      mu_b /= wsum;
      double var_a = 0, var_b = 0, cov = 0;
      for (int dy = -kHalf; dy <= kHalf; ++dy)
        for (int dx = -kHalf; dx <= kHalf; ++dx) {
          long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(ha) ||
              xx >= static_cast<long>(wa))
            continue;
          double wgt = weights[dy + kHalf][dx + kHalf] / wsum;
          double da = pa[yy * wa + xx] - mu_a;
          double db = pb[yy * wa + xx] - mu_b;
          var_a += wgt * da * da;
          var_b += wgt * db * db;
          cov += wgt * da * db;
        }
      double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
      double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      acc += num / den;
      count++;
    }
  return acc / static_cast<double>(count);
}

// ---- pyramid ----

namespace {

Tensor blur_decimate(const Tensor& img) {
  std::size_t h, w;
  const double* px;
  as_plane(img, h, w, &px);
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  auto reflect = [](long i, long n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  std::vector<double> tmp(h * w), out_full(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int t = -2; t <= 2; ++t)
        acc += k[t + 2] * px[y * w + reflect(static_cast<long>(x) + t,
                                             static_cast<long>(w))];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int t = -2; t <= 2; ++t)
        acc += k[t + 2] * tmp[reflect(static_cast<long>(y) + t,
                                      static_cast<long>(h)) * w + x];
      out_full[y * w + x] = acc;
    }
  std::size_t h2 = h / 2, w2 = w / 2;
  std::vector<double> out(h2 * w2);
  for (std::size_t y = 0; y < h2; ++y)
    for (std::size_t x = 0; x < w2; ++x)
      out[y * w2 + x] = out_full[(2 * y) * w + 2 * x];
  return Tensor::from_data({h2, w2}, std::move(out), img.dtype());
}

Tensor to_plane(const Tensor& t) {
  std::size_t h, w;
  const double* px;
  as_plane(t, h, w, &px);
  return Tensor::from_data({h, w}, t.data(), t.dtype());
}

}  // namespace

std::vector<Tensor> gaussian_pyramid(const Tensor& img, std::size_t levels) {
  if (levels < 1) fail(ErrorKind::contract, "gaussian_pyramid: levels >= 1");
  std::size_t h, w;
  const double* px;
  as_plane(img, h, w, &px);
  std::size_t div = std::size_t{1} << (levels - 1);
  if (h % div != 0 || w % div != 0)
    fail(ErrorKind::shape, "gaussian_pyramid: extents not divisible by 2^(levels-1)");
  std::vector<Tensor> out{to_plane(img)};
  for (std::size_t l = 1; l < levels; ++l)
    out.push_back(blur_decimate(out.back()));
  return out;
}

std::vector<CurveRow> heterogeneity_curve(
    const std::vector<std::pair<Tensor, Tensor>>& pairs, std::size_t levels) {
  if (pairs.empty()) fail(ErrorKind::contract, "heterogeneity_curve: no pairs");
  std::vector<std::vector<double>> per_level(levels);
  for (const auto& [optical, sar] : pairs) {
    Tensor lum = optical.dim(0) == 3 ? data::luminance(optical) : optical;
    auto pyr_o = gaussian_pyramid(lum, levels);
    auto pyr_s = gaussian_pyramid(sar, levels);
    for (std::size_t l = 0; l < levels; ++l)
      per_level[l].push_back(ssim(pyr_o[l], pyr_s[l]));
  }
  std::vector<CurveRow> rows;
  for (std::size_t l = 0; l < levels; ++l) {
    CurveRow r;
    r.level = l;
    r.equivalent_scale = static_cast<double>(std::size_t{1} << l);
    double n = static_cast<double>(per_level[l].size());
    for (double v : per_level[l]) r.mean_ssim += v;
    r.mean_ssim /= n;
    for (double v : per_level[l])
      r.std_ssim += (v - r.mean_ssim) * (v - r.mean_ssim);
    r.std_ssim = std::sqrt(r.std_ssim / n);
    rows.push_back(r);
  }
  return rows;
}

// ---- alignment ----

Tensor frozen_embedding(const model::ModelState& m, const Tensor& image,
                        model::Modality modality) {
  data::MaskPlan dense;
  dense.token_count = m.config.tokens();
  dense.ratio = 0.0;
  dense.m.assign(dense.token_count, 0);
  dense.visible.resize(dense.token_count);
  std::iota(dense.visible.begin(), dense.visible.end(), std::size_t{0});
  Tensor tokens = model::encode_visible(m, image, modality, dense);
  return numcore::mean_rows(tokens).detached();
}

namespace {

Tensor dense_tokens(const model::ModelState& m, const Tensor& image,
                    model::Modality modality) {
  data::MaskPlan dense;
  dense.token_count = m.config.tokens();
  dense.ratio = 0.0;
  dense.m.assign(dense.token_count, 0);
  dense.visible.resize(dense.token_count);
  std::iota(dense.visible.begin(), dense.visible.end(), std::size_t{0});
  return model::encode_visible(m, image, modality, dense).detached();
}

double cosine(const double* a, const double* b, std::size_t d) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::max(std::sqrt(na * nb), 1e-12);
}

Tensor crop_patch(const Tensor& plane, std::size_t gy, std::size_t gx,
                  std::size_t p) {
  std::size_t w = plane.dim(1);
  std::vector<double> out(p * p);
  for (std::size_t y = 0; y < p; ++y)
    for (std::size_t x = 0; x < p; ++x)
      out[y * p + x] = plane.at((gy * p + y) * w + gx * p + x);
  return Tensor::from_data({p, p}, std::move(out), plane.dtype());
}

}  // namespace

std::vector<AlignmentPoint> alignment_vs_heterogeneity(
    const std::vector<data::Sample>& pairs, const model::ModelState& m,
    const data::NormStats* stats) {
  std::vector<AlignmentPoint> out;
  std::size_t p = m.config.patch, grid = m.config.grid(), d = m.config.width;
  for (const auto& s : pairs) {
    if (!s.optical || !s.sar)
      fail(ErrorKind::contract, "alignment: paired samples required");
    Tensor enc_o = *s.optical, enc_s = *s.sar;
    if (stats) {
      enc_o = data::normalize(enc_o, stats->get(s.dataset_id, "optical"));
      enc_s = data::normalize(enc_s, stats->get(s.dataset_id, "sar"));
    }
    Tensor tok_o = dense_tokens(m, enc_o, model::Modality::optical);
    Tensor tok_s = dense_tokens(m, enc_s, model::Modality::sar);
    Tensor lum = to_plane(data::luminance(*s.optical));
    Tensor sarp = to_plane(*s.sar);
    for (std::size_t gy = 0; gy < grid; ++gy)
      for (std::size_t gx = 0; gx < grid; ++gx) {
        std::size_t idx = gy * grid + gx;
        AlignmentPoint pt;
        pt.patch_index = idx;
        pt.sample_id = s.sample_id;
        pt.patch_ssim = ssim(crop_patch(lum, gy, gx, p),
                             crop_patch(sarp, gy, gx, p));
        pt.embedding_cosine = cosine(tok_o.data().data() + idx * d,
                                     tok_s.data().data() + idx * d, d);
        out.push_back(pt);
      }
  }
  return out;
}

double spearman(const std::vector<AlignmentPoint>& points) {
  std::size_t n = points.size();
  if (n < 2) fail(ErrorKind::contract, "spearman: need >= 2 points");
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = points[i].patch_ssim;
    b[i] = points[i].embedding_cosine;
  }
  auto ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::max(std::sqrt(va * vb), 1e-12);
}

// ---- PCA ----

Tensor pca_project(const Tensor& embeddings, std::size_t k) {
  if (embeddings.rank() != 2 || embeddings.dim(0) <= k)
    fail(ErrorKind::shape, "pca_project: n > k required");
  std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = embeddings.at(i * d + j);
  x.rowwise() -= x.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  // sign convention: first nonzero loading of each component is positive
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      if (std::fabs(v(r, c)) > 1e-12) {
        if (v(r, c) < 0) v.col(c) = -v.col(c);
        break;
      }
  Eigen::MatrixXd proj = x * v;
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      out[i * k + j] = proj(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j));
  return Tensor::from_data({n, k}, std::move(out), DType::f64);
}

// ---- linear probe ----

double linear_probe(const Tensor& features, const std::vector<int>& labels,
                    const ProbeConfig& config) {
  std::size_t n = features.dim(0), d = features.dim(1);
  if (labels.size() != n)
    fail(ErrorKind::shape, "linear_probe: label count mismatch");
  int classes = 0;
  for (int l : labels) classes = std::max(classes, l + 1);
  {
    std::vector<bool> seen(classes, false);
    int distinct = 0;
    for (int l : labels)
      if (!seen[l]) {
        seen[l] = true;
        distinct++;
      }
    if (distinct < 2)
      fail(ErrorKind::contract, "linear_probe: single-class input");
  }

  // column standardization for stable full-batch descent
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += features.at(i * d + j);
  for (auto& v : mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double c = features.at(i * d + j) - mean[j];
      scale[j] += c * c;
    }
  for (auto& v : scale) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);

  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x[i * d + j] = (features.at(i * d + j) - mean[j]) / scale[j];

  // seeded split
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(config.seed, 0x9a0beULL));
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(config.holdout_fraction *
                                         static_cast<double>(n));
  n_test = std::max<std::size_t>(n_test, 1);
  std::vector<std::size_t> test(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train(order.begin() + n_test, order.end());
  if (train.empty()) fail(ErrorKind::contract, "linear_probe: empty train split");

  std::vector<double> w(d * classes, 0.0), bias(classes, 0.0);
  std::vector<double> gw(d * classes), gb(classes), logits(classes);
  double prev_loss = 1e300;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = 0.0;
    for (std::size_t idx : train) {
      const double* xi = x.data() + idx * d;
      double mx = -1e300;
      for (int c = 0; c < classes; ++c) {
        double z = bias[c];
        for (std::size_t j = 0; j < d; ++j) z += xi[j] * w[j * classes + c];
        logits[c] = z;
        mx = std::max(mx, z);
      }
      double zsum = 0.0;
      for (int c = 0; c < classes; ++c) zsum += std::exp(logits[c] - mx);
      loss -= logits[labels[idx]] - mx - std::log(zsum);
      for (int c = 0; c < classes; ++c) {
        double p = std::exp(logits[c] - mx) / zsum;
        double g = p - (c == labels[idx] ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[j * classes + c] += g * xi[j];
      }
    }
    double inv = 1.0 / static_cast<double>(train.size());
    loss *= inv;
    for (std::size_t j = 0; j < w.size(); ++j)
      w[j] -= config.learning_rate * gw[j] * inv;
    for (int c = 0; c < classes; ++c)
      bias[c] -= config.learning_rate * gb[c] * inv;
    if (std::fabs(prev_loss - loss) < config.tolerance) break;
    prev_loss = loss;
  }

  std::size_t correct = 0;
  for (std::size_t idx : test) {
    const double* xi = x.data() + idx * d;
    int best = 0;
    double best_z = -1e300;
    for (int c = 0; c < classes; ++c) {
      double z = bias[c];
      for (std::size_t j = 0; j < d; ++j) z += xi[j] * w[j * classes + c];
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    if (best == labels[idx]) correct++;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---- report I/O ----

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::io, "cannot write report: " + path);
  return f;
}
}  // namespace

void write_spectrum_csv(const std::string& path, const SpectrumReport& r) {
  auto f = open_out(path);
  f << "variant,index,singular_value,effective_rank,token_count,width\n";
  char buf[64];
  for (std::size_t i = 0; i < r.singular_values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g", r.singular_values[i],
                  r.effective_rank);
    f << r.variant << ',' << i << ',' << buf << ',' << r.token_count << ','
      << r.width << '\n';
  }
}

void write_curve_csv(const std::string& path, const std::vector<CurveRow>& rows) {
  auto f = open_out(path);
  f << "level,equivalent_scale,mean_ssim,std_ssim\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g", r.level,
                  r.equivalent_scale, r.mean_ssim, r.std_ssim);
    f << buf << '\n';
  }
}

void write_alignment_csv(const std::string& path,
                         const std::vector<AlignmentPoint>& points) {
  auto f = open_out(path);
  f << "sample_id,patch_index,patch_ssim,embedding_cosine\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g", p.patch_ssim,
                  p.embedding_cosine);
    f << p.sample_id << ',' << p.patch_index << ',' << buf << '\n';
  }
}

void write_summary_kv(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& kv) {
  auto f = open_out(path);
  for (const auto& [k, v] : kv) f << k << ": " << v << '\n';
}

}  // namespace codemae::diagnostics
