// Copyright 2026 The pairdist Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pairdist/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pairdist/checkpoint.hpp"
#include "pairdist/color.hpp"
#include "pairdist/error.hpp"
#include "pairdist/resize.hpp"
#include "pairdist/tensor_archive.hpp"
#include "pairdist/torch_bridge.hpp"

namespace pairdist {

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw InvalidShape(std::string(what) + ": images differ in shape");
  }
}

// Luma as a row-major plane; single-channel input is taken as luma already.
std::vector<double> y_plane(const ImageTensor& img) {
  const ImageTensor y = img.channels() == 1 ? img : luma(img);
  return {y.data().begin(), y.data().end()};
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

constexpr double kFlatStd = 1e-12;

ImageTensor color_correct(const ImageTensor& sr, const ImageTensor& lr, bool clip) {
  if (sr.channels() != lr.channels()) throw InvalidShape("color_correct: channel counts differ");
  if (sr.colorspace() != ColorSpace::RGB || lr.colorspace() != ColorSpace::RGB) {
    throw InvalidInput("color_correct expects RGB images");
  }
  const int c = sr.channels();
  ImageTensor out(sr.height(), sr.width(), c, ColorSpace::RGB);
  out.set_source(sr.source());
  auto stats = [c](const ImageTensor& img, int ch) {
    const auto d = img.data();
    const std::size_t n = d.size() / c;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += d[i * c + ch];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (d[i * c + ch] - mean) * (d[i * c + ch] - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(n))};
  };
  const auto src = sr.data();
  auto dst = out.data();
  const std::size_t n = src.size() / c;
  for (int ch = 0; ch < c; ++ch) {
    const auto [ms, ss] = stats(sr, ch);
    const auto [ml, sl] = stats(lr, ch);
    for (std::size_t i = 0; i < n; ++i) {
      // A flat channel has round-off-sized spread; treat it as constant.
      double v = ss > kFlatStd ? (src[i * c + ch] - ms) * (sl / ss) + ml : ml;
      dst[i * c + ch] = clip ? std::clamp(v, 0.0, 1.0) : v;
    }
  }
  return out;
}

double psnr_y(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr_y");
  const auto ya = y_plane(a), yb = y_plane(b);
  double mse = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) mse += (ya[i] - yb[i]) * (ya[i] - yb[i]);
  mse /= static_cast<double>(ya.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim_y(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim_y");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const int h = a.height(), w = a.width();
  if (h < kWin || w < kWin) throw InvalidShape("ssim_y needs both sides >= 11");
  std::array<double, kWin> g{};
  double gs = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - kWin / 2;
    g[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    gs += g[i];
  }
  for (double& v : g) v /= gs;

  const auto ya = y_plane(a), yb = y_plane(b);
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  // Separable valid filtering of a plane.
  auto filter = [&](const std::vector<double>& p) {
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * p[r * w + c + k];
        tmp[r * ow + c] = s;
      }
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * tmp[(r + k) * ow + c];
        out[r * ow + c] = s;
      }
    return out;
  };
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto mu_a = filter(ya), mu_b = filter(yb), e_aa = filter(aa), e_bb = filter(bb), e_ab = filter(ab);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double sharpness(const ImageTensor& img) {
  const int h = img.height(), w = img.width();
  if (h < 2 || w < 2) throw InvalidShape("sharpness needs at least 2 x 2 pixels");
  const auto y = y_plane(img);
  double total = 0.0;
  for (int r = 0; r + 1 < h; ++r)
    for (int c = 0; c + 1 < w; ++c) {
      const double gx = y[r * w + c + 1] - y[r * w + c];
      const double gy = y[(r + 1) * w + c] - y[r * w + c];
      total += std::sqrt(gx * gx + gy * gy);
    }
  return total / (static_cast<double>(h - 1) * (w - 1));
}

Upscaler generator_upscaler(Generator g) {
  return [g](const ImageTensor& lr) {
    torch::NoGradGuard no_grad;
    Generator net = g;
    ImageTensor out = to_image(net->forward(to_tensor(lr)).squeeze(0));
    out.set_source(lr.source());
    return out;
  };
}

Upscaler bicubic_upscaler(int scale) {
  return [scale](const ImageTensor& lr) {
    return resize(lr, lr.height() * scale, lr.width() * scale, Interp::Bicubic);
  };
}

void EvalReport::recompute_aggregates() {
  psnr_y = ssim_y = sharpness = 0.0;
  external.clear();
  if (rows.empty()) return;
  std::map<std::string, int> counts;
  for (const auto& r : rows) {
    psnr_y += r.psnr_y;
    ssim_y += r.ssim_y;
    sharpness += r.sharpness;
    for (const auto& [k, v] : r.external) {
      external[k] += v;
      ++counts[k];
    }
  }
  const double n = static_cast<double>(rows.size());
  psnr_y /= n;
  ssim_y /= n;
  sharpness /= n;
  for (auto& [k, v] : external) v /= counts[k];
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.rows) {
    nlohmann::json row{{"id", s.id}, {"psnr_y", s.psnr_y}, {"ssim_y", s.ssim_y}, {"sharpness", s.sharpness}};
    for (const auto& [k, v] : s.external) row[k] = v;
    rows.push_back(std::move(row));
  }
  nlohmann::json agg{{"psnr_y", r.psnr_y}, {"ssim_y", r.ssim_y}, {"sharpness", r.sharpness}};
  for (const auto& [k, v] : r.external) agg[k] = v;
  return {{"dataset_id", r.dataset_id}, {"model_id", r.model_id},     {"color_correction", r.color_correction},
          {"count", r.rows.size()},     {"aggregate", std::move(agg)}, {"images", std::move(rows)}};
}

void write_eval_report(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(r).dump(2) << '\n';
}

std::vector<ImageTensor> load_lr_images(const Manifest& m, int max_images) {
  std::vector<ImageTensor> out;
  for (const auto& e : m.entries) {
    if (max_images > 0 && static_cast<int>(out.size()) >= max_images) break;
    out.push_back(read_png(e.lr_path));
  }
  return out;
}

std::vector<ImageTensor> load_hr_images(const Manifest& m, int max_images) {
  std::vector<ImageTensor> out;
  for (const auto& e : m.entries) {
    if (max_images > 0 && static_cast<int>(out.size()) >= max_images) break;
    out.push_back(read_png(e.hr_path));
  }
  return out;
}

EvalReport evaluate(const Upscaler& up, const Manifest& manifest, const EvalOptions& opts) {
  EvalReport rep;
  rep.dataset_id = manifest.domain;
  rep.model_id = opts.model_id;
  rep.color_correction = opts.color_correction;
  for (const auto& e : manifest.entries) {
    if (opts.max_images > 0 && static_cast<int>(rep.rows.size()) >= opts.max_images) break;
    const ImageTensor lr = read_png(e.lr_path);
    const ImageTensor hr = read_png(e.hr_path);
    ImageTensor sr = up(lr);
    if (opts.color_correction) sr = color_correct(sr, lr);
    if (sr.height() != hr.height() || sr.width() != hr.width()) {
      throw InvalidShape("prediction for " + e.lr_path.filename().string() + " does not match its HR size");
    }
    rep.rows.push_back({e.lr_path.filename().string(), psnr_y(sr, hr), ssim_y(sr, hr), sharpness(sr), {}});
  }
  rep.recompute_aggregates();
  return rep;
}

EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                               bool color_correction, const std::string& role) {
  const auto ck_bytes = read_file_bytes(checkpoint);
  const auto mf_bytes = read_file_bytes(manifest);
  Checkpoint ck = decode_checkpoint(ck_bytes);
  Generator g{nullptr};
  if (role == "specialist") g = ck.pair.specialist;
  else if (role == "generalist") g = ck.pair.generalist;
  else throw InvalidInput("unknown model role '" + role + "'");
  const Manifest m = load_manifest(manifest);
  EvalOptions opts;
  opts.color_correction = color_correction;
  // The file ends in its own checksum; hash the body so ids differ.
  const std::span<const unsigned char> ck_body(ck_bytes.data(), ck_bytes.size() - 4);
  opts.model_id = role + "@crc32:" + hex32(crc32_of(ck_body));
  EvalReport rep = evaluate(generator_upscaler(g), m, opts);
  rep.dataset_id = m.domain + "@crc32:" + hex32(crc32_of(mf_bytes));
  return rep;
}

void merge_external_metrics(EvalReport& report, const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot read " + csv.string());
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(trim(cell));
    if (cols.size() != 3) throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    if (lineno == 1 && cols[0] == "image_id") continue;
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": bad value '" + cols[2] + "'");
    }
    auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ImageScore& r) { return r.id == cols[0]; });
    if (it == report.rows.end()) throw DataError("external metric for unknown image '" + cols[0] + "'");
    it->external[cols[1]] = value;
  }
  report.recompute_aggregates();
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd tile_descriptors(std::span<const ImageTensor> images, const FeatureExtractor& ex,
                                 const DomainGapOptions& opts) {
  torch::NoGradGuard no_grad;
  const std::vector<TapId> one{opts.tap};
  const int stride = 1 << (opts.tap.block - 1);
  std::vector<Eigen::VectorXd> rows;
  for (const auto& img : images) {
    const torch::Tensor fmap = ex.forward(to_tensor(img, ex.dtype()), one)[0].squeeze(0);
    const int fh = static_cast<int>(fmap.size(1)), fw = static_cast<int>(fmap.size(2));
    const int t = opts.tile > 0 ? std::max(1, opts.tile / stride) : std::max(fh, fw);
    if (t > fh || t > fw) {
      rows.push_back(pooled_descriptor(fmap));
      continue;
    }
    for (int r = 0; r + t <= fh; r += t)
      for (int c = 0; c + t <= fw; c += t) rows.push_back(pooled_descriptor(fmap.narrow(1, r, t).narrow(2, c, t)));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

}  // namespace

DomainGapResult domain_gap_analysis(std::span<const ImageTensor> labeled_preds,
                                    std::span<const ImageTensor> unlabeled_preds, const FeatureExtractor& ex,
                                    const DomainGapOptions& opts) {
  if (labeled_preds.size() < 8 || unlabeled_preds.size() < 8) {
    throw InvalidInput("domain gap analysis needs at least 8 images per set");
  }
  const Eigen::MatrixXd a = tile_descriptors(labeled_preds, ex, opts);
  const Eigen::MatrixXd b = tile_descriptors(unlabeled_preds, ex, opts);
  DomainGapResult r;
  r.labeled = regularized(fit_gaussian(a));
  r.unlabeled = regularized(fit_gaussian(b));
  r.kl = kl_gaussian(r.labeled, r.unlabeled);
  Eigen::MatrixXd both(a.rows() + b.rows(), a.cols());
  both << a, b;
  r.projection = pca_2d(both);
  r.labeled_samples = static_cast<int>(a.rows());
  r.unlabeled_samples = static_cast<int>(b.rows());
  return r;
}

DomainGapResult domain_gap_for_model(const Upscaler& up, std::span<const ImageTensor> labeled_lr,
                                     std::span<const ImageTensor> unlabeled_lr, const FeatureExtractor& ex,
                                     const DomainGapOptions& opts) {
  std::vector<ImageTensor> a, b;
  for (const auto& img : labeled_lr) a.push_back(up(img));
  for (const auto& img : unlabeled_lr) b.push_back(up(img));
  return domain_gap_analysis(a, b, ex, opts);
}

nlohmann::json to_json(const DomainGapResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.projection.points.rows(); ++i) {
    pts.push_back({{"set", i < r.labeled_samples ? "labeled" : "unlabeled"},
                   {"x", r.projection.points(i, 0)},
                   {"y", r.projection.points(i, 1)}});
  }
  return {{"kl_labeled_unlabeled", r.kl},
          {"labeled_samples", r.labeled_samples},
          {"unlabeled_samples", r.unlabeled_samples},
          {"descriptor_dim", r.labeled.dim()},
          {"projection", "pca"},
          {"points", std::move(pts)}};
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_projection_svg(const DomainGapResult& r, const std::filesystem::path& path, const std::string& title) {
  constexpr double W = 480, H = 400, M = 40;
  const auto& p = r.projection.points;
  double x0 = p.col(0).minCoeff(), x1 = p.col(0).maxCoeff();
  double y0 = p.col(1).minCoeff(), y1 = p.col(1).maxCoeff();
  if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << svg_escape(title)
    << " (PCA projection, substitute for the original method)</text>\n";
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double x = M + (p(i, 0) - x0) / (x1 - x0) * (W - 2 * M);
    const double y = H - M - (p(i, 1) - y0) / (y1 - y0) * (H - 2 * M);
    s << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.5\" fill=\""
      << (i < r.labeled_samples ? "#1f77b4" : "#d62728") << "\" fill-opacity=\"0.6\"/>\n";
  }
  s << "<text x=\"" << M << "\" y=\"" << H - 10 << "\" font-size=\"11\" fill=\"#1f77b4\">labeled</text>\n"
    << "<text x=\"" << M + 70 << "\" y=\"" << H - 10 << "\" font-size=\"11\" fill=\"#d62728\">unlabeled</text>\n"
    << "</svg>\n";
  write_text(path, s.str());
}

void write_kl_svg(const std::vector<std::pair<std::string, double>>& bars, const std::filesystem::path& path,
                  const std::string& title) {
  constexpr double W = 420, H = 320, M = 50;
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.second);
  if (top <= 0.0) top = 1.0;
  const double bw = bars.empty() ? 0.0 : (W - 2 * M) / static_cast<double>(bars.size());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << svg_escape(title)
    << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = bars[i].second / top * (H - 2 * M);
    const double x = M + static_cast<double>(i) * bw + bw * 0.15;
    s << "<rect x=\"" << x << "\" y=\"" << H - M - h << "\" width=\"" << bw * 0.7 << "\" height=\"" << h
      << "\" fill=\"#4c72b0\"/>\n"
      << "<text x=\"" << x + bw * 0.35 << "\" y=\"" << H - M + 15 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << svg_escape(bars[i].first) << "</text>\n"
      << "<text x=\"" << x + bw * 0.35 << "\" y=\"" << H - M - h - 4
      << "\" text-anchor=\"middle\" font-size=\"10\">" << bars[i].second << "</text>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

}  // namespace pairdist
