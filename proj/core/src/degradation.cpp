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

#include "pairdist/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pairdist/error.hpp"

namespace pairdist {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

cv::Mat to_mat(const ImageTensor& img) {
  cv::Mat mat(img.height(), img.width(), CV_64FC(img.channels()));
  std::copy(img.data().begin(), img.data().end(), mat.ptr<double>(0));
  return mat;
}

ImageTensor from_mat(const cv::Mat& mat, const ImageTensor& like) {
  std::vector<double> data(mat.ptr<double>(0), mat.ptr<double>(0) + mat.total() * mat.channels());
  ImageTensor out = ImageTensor::from_data_clipped(mat.rows, mat.cols, mat.channels(),
                                                   std::move(data), like.colorspace());
  out.set_source(like.source());
  return out;
}

int kernel_radius(double sigma) { return std::max(1, static_cast<int>(std::ceil(3.0 * sigma))); }

}  // namespace

// ---------------------------------------------------------------------------
// Stage operators
// ---------------------------------------------------------------------------

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
  if (!(sigma >= 0.0)) throw InvalidInput("blur sigma must be >= 0");
  if (sigma == 0.0) return img;
  const int r = kernel_radius(sigma);
  cv::Mat out;
  cv::GaussianBlur(to_mat(img), out, cv::Size(2 * r + 1, 2 * r + 1), sigma, sigma,
                   cv::BORDER_REFLECT_101);
  return from_mat(out, img);
}

ImageTensor anisotropic_blur(const ImageTensor& img, double sigma_x, double sigma_y,
                             double theta) {
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw InvalidInput("blur sigmas must be > 0");
  const int r = kernel_radius(std::max(sigma_x, sigma_y));
  const double c = std::cos(theta), s = std::sin(theta);
  cv::Mat kernel(2 * r + 1, 2 * r + 1, CV_64F);
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      const double w = std::exp(-0.5 * (u * u / (sigma_x * sigma_x) + v * v / (sigma_y * sigma_y)));
      kernel.at<double>(dy + r, dx + r) = w;
      total += w;
    }
  }
  kernel /= total;
  cv::Mat out;
  cv::filter2D(to_mat(img), out, CV_64F, kernel, cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT_101);
  return from_mat(out, img);
}

ImageTensor add_gaussian_noise(const ImageTensor& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidInput("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> data(img.data().begin(), img.data().end());
  for (double& v : data) v += normal(rng);
  ImageTensor out = ImageTensor::from_data_clipped(img.height(), img.width(), img.channels(),
                                                   std::move(data), img.colorspace());
  out.set_source(img.source());
  return out;
}

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
  if (quality < 1 || quality > 100) throw InvalidInput("JPEG quality must be in [1, 100]");
  if (img.channels() != 3) throw InvalidInput("JPEG stage expects a 3-channel image");
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x)
      row[x] = cv::Vec3b(quantize_u8(img.at(y, x, 2)), quantize_u8(img.at(y, x, 1)),
                         quantize_u8(img.at(y, x, 0)));
  }
  std::vector<unsigned char> buf;
  if (!cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw IoError("JPEG encoding failed");
  }
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (decoded.empty()) throw IoError("JPEG decoding failed");
  ImageTensor out(img.height(), img.width(), 3, img.colorspace());
  for (int y = 0; y < img.height(); ++y) {
    const auto* row = decoded.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      out.at(y, x, 0) = row[x][2] / 255.0;
      out.at(y, x, 1) = row[x][1] / 255.0;
      out.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  out.set_source(img.source());
  return out;
}

std::string stage_kind(const DegradationStage& stage) {
  struct Visitor {
    std::string operator()(const GaussianBlur&) const { return "gaussian_blur"; }
    std::string operator()(const AnisotropicBlur&) const { return "anisotropic_blur"; }
    std::string operator()(const GaussianNoise&) const { return "gaussian_noise"; }
    std::string operator()(const ResizeStage&) const { return "resize"; }
    std::string operator()(const JpegStage&) const { return "jpeg"; }
  };
  return std::visit(Visitor{}, stage);
}

ImageTensor apply_stage(const ImageTensor& img, const DegradationStage& stage) {
  struct Visitor {
    const ImageTensor& img;
    ImageTensor operator()(const GaussianBlur& s) const { return gaussian_blur(img, s.sigma); }
    ImageTensor operator()(const AnisotropicBlur& s) const {
      return anisotropic_blur(img, s.sigma_x, s.sigma_y, s.theta);
    }
    ImageTensor operator()(const GaussianNoise& s) const {
      return add_gaussian_noise(img, s.sigma, s.seed);
    }
    ImageTensor operator()(const ResizeStage& s) const {
      if (!(s.factor > 0.0)) throw InvalidInput("resize factor must be > 0");
      const int h = std::max(1, static_cast<int>(std::lround(img.height() * s.factor)));
      const int w = std::max(1, static_cast<int>(std::lround(img.width() * s.factor)));
      return resize(img, h, w, s.interp);
    }
    ImageTensor operator()(const JpegStage& s) const { return jpeg_roundtrip(img, s.quality); }
  };
  return std::visit(Visitor{img}, stage);
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

double DegradationRecipe::resize_product() const {
  double p = 1.0;
  for (const auto& s : stages)
    if (const auto* r = std::get_if<ResizeStage>(&s)) p *= r->factor;
  return p;
}

json to_json(const DegradationStage& stage) {
  struct Visitor {
    json operator()(const GaussianBlur& s) const {
      return {{"kind", "gaussian_blur"}, {"sigma", s.sigma}};
    }
    json operator()(const AnisotropicBlur& s) const {
      return {{"kind", "anisotropic_blur"},
              {"sigma_x", s.sigma_x},
              {"sigma_y", s.sigma_y},
              {"theta", s.theta}};
    }
    json operator()(const GaussianNoise& s) const {
      return {{"kind", "gaussian_noise"}, {"sigma", s.sigma}, {"seed", s.seed}};
    }
    json operator()(const ResizeStage& s) const {
      return {{"kind", "resize"}, {"interp", to_string(s.interp)}, {"factor", s.factor}};
    }
    json operator()(const JpegStage& s) const { return {{"kind", "jpeg"}, {"quality", s.quality}}; }
  };
  return std::visit(Visitor{}, stage);
}

DegradationStage stage_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian_blur") return GaussianBlur{j.at("sigma").get<double>()};
    if (kind == "anisotropic_blur") {
      return AnisotropicBlur{j.at("sigma_x").get<double>(), j.at("sigma_y").get<double>(),
                             j.at("theta").get<double>()};
    }
    if (kind == "gaussian_noise") {
      return GaussianNoise{j.at("sigma").get<double>(), j.at("seed").get<std::uint64_t>()};
    }
    if (kind == "resize") {
      return ResizeStage{interp_from_string(j.at("interp").get<std::string>()),
                         j.at("factor").get<double>()};
    }
    if (kind == "jpeg") return JpegStage{j.at("quality").get<int>()};
    throw ConfigError("unknown stage kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed stage: ") + e.what());
  }
}

json to_json(const DegradationRecipe& recipe) {
  json stages = json::array();
  for (const auto& s : recipe.stages) stages.push_back(to_json(s));
  return {{"stages", stages}, {"final_scale", recipe.final_scale}, {"seed", recipe.seed}};
}

DegradationRecipe recipe_from_json(const json& j) {
  DegradationRecipe r;
  try {
    for (const auto& s : j.at("stages")) r.stages.push_back(stage_from_json(s));
    r.final_scale = j.at("final_scale").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed recipe: ") + e.what());
  }
  if (r.final_scale < 1) throw ConfigError("final_scale must be >= 1");
  return r;
}

ImageTensor apply_recipe(const ImageTensor& hr, const DegradationRecipe& recipe) {
  const int scale = recipe.final_scale;
  if (scale < 1) throw InvalidInput("final_scale must be >= 1");
  if (hr.empty() || hr.height() % scale != 0 || hr.width() % scale != 0) {
    throw InvalidShape("HR image " + std::to_string(hr.height()) + "x" +
                       std::to_string(hr.width()) + " not divisible by final_scale " +
                       std::to_string(scale));
  }
  const int th = hr.height() / scale, tw = hr.width() / scale;
  ImageTensor current = hr;
  for (const auto& stage : recipe.stages) current = apply_stage(current, stage);
  if (current.height() != th || current.width() != tw) {
    current = resize(current, th, tw, Interp::Bicubic);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Pipeline configs
// ---------------------------------------------------------------------------

std::string to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::Specialist: return "D_S";
    case DomainTag::Generalist: return "D_G";
    case DomainTag::PseudoReal: return "pseudo_real";
  }
  return "unknown";
}

DomainTag domain_from_string(const std::string& name) {
  if (name == "D_S") return DomainTag::Specialist;
  if (name == "D_G") return DomainTag::Generalist;
  if (name == "pseudo_real") return DomainTag::PseudoReal;
  throw ConfigError("unknown domain tag '" + name + "'");
}

std::size_t PipelineConfig::stage_count() const {
  std::size_t n = 0;
  for (const auto& r : rounds) n += r.size();
  return n;
}

namespace {

void check_range(const Range& r, const std::string& what, double min_lo, double max_hi) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw ConfigError(what + " range is empty or inverted");
  }
  if (r.lo < min_lo || r.hi > max_hi) {
    throw ConfigError(what + " range outside [" + std::to_string(min_lo) + ", " +
                      std::to_string(max_hi) + "]");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (scale < 1) throw ConfigError("scale must be >= 1");
  if (rounds.empty() || rounds.size() > 2) throw ConfigError("pipeline needs 1 or 2 rounds");
  constexpr double kTiny = 1e-12;
  for (const auto& round : rounds) {
    for (const auto& s : round) {
      if (s.kind == "gaussian_blur") {
        check_range(s.sigma, "blur sigma", kTiny, 50.0);
      } else if (s.kind == "anisotropic_blur") {
        check_range(s.sigma_x, "blur sigma_x", kTiny, 50.0);
        check_range(s.sigma_y, "blur sigma_y", kTiny, 50.0);
        check_range(s.theta, "blur theta", -std::numbers::pi, std::numbers::pi);
      } else if (s.kind == "gaussian_noise") {
        check_range(s.sigma, "noise sigma", kTiny, 1.0);
      } else if (s.kind == "resize") {
        if (s.interps.empty()) throw ConfigError("resize stage needs at least one interpolation");
        if (!s.complete_scale) check_range(s.factor, "resize factor", 0.01, 4.0);
      } else if (s.kind == "jpeg") {
        check_range(s.quality, "jpeg quality", 1.0, 100.0);
      } else {
        throw ConfigError("unknown stage kind '" + s.kind + "'");
      }
    }
  }
}

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string(key) + " must be a number or [lo, hi]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

json spec_json(const StageSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "gaussian_blur" || s.kind == "gaussian_noise") j["sigma"] = range_json(s.sigma);
  if (s.kind == "anisotropic_blur") {
    j["sigma_x"] = range_json(s.sigma_x);
    j["sigma_y"] = range_json(s.sigma_y);
    j["theta"] = range_json(s.theta);
  }
  if (s.kind == "resize") {
    if (s.complete_scale) {
      j["complete_scale"] = true;
    } else {
      j["factor"] = range_json(s.factor);
    }
    json modes = json::array();
    for (Interp i : s.interps) modes.push_back(to_string(i));
    j["interp"] = modes;
  }
  if (s.kind == "jpeg") j["quality"] = range_json(s.quality);
  return j;
}

StageSpec spec_from(const json& j) {
  static const std::vector<std::string> kAllowed = {"kind",   "sigma",  "sigma_x",
                                                    "sigma_y", "theta", "factor",
                                                    "complete_scale", "interp", "quality"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(kAllowed.begin(), kAllowed.end(), key) == kAllowed.end()) {
      throw ConfigError("unknown stage key '" + key + "'");
    }
  }
  StageSpec s;
  s.kind = j.at("kind").get<std::string>();
  if (s.kind == "gaussian_blur" || s.kind == "gaussian_noise") s.sigma = range_from(j, "sigma");
  if (s.kind == "anisotropic_blur") {
    s.sigma_x = range_from(j, "sigma_x");
    s.sigma_y = range_from(j, "sigma_y");
    s.theta = j.contains("theta") ? range_from(j, "theta") : Range{0.0, 0.0};
  }
  if (s.kind == "resize") {
    s.complete_scale = j.value("complete_scale", false);
    if (!s.complete_scale) s.factor = range_from(j, "factor");
    if (j.contains("interp")) {
      s.interps.clear();
      const auto& modes = j.at("interp");
      if (modes.is_string()) {
        s.interps.push_back(interp_from_string(modes.get<std::string>()));
      } else {
        for (const auto& m : modes) s.interps.push_back(interp_from_string(m.get<std::string>()));
      }
    }
  }
  if (s.kind == "jpeg") s.quality = range_from(j, "quality");
  return s;
}

}  // namespace

json to_json(const PipelineConfig& cfg) {
  json rounds = json::array();
  for (const auto& round : cfg.rounds) {
    json r = json::array();
    for (const auto& s : round) r.push_back(spec_json(s));
    rounds.push_back(r);
  }
  return {{"domain", to_string(cfg.domain)},
          {"scale", cfg.scale},
          {"order", cfg.order == StageOrder::Fixed ? "fixed" : "shuffle_per_round"},
          {"rounds", rounds}};
}

PipelineConfig pipeline_from_json(const json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "domain" && key != "scale" && key != "order" && key != "rounds") {
      throw ConfigError("unknown pipeline key '" + key + "'");
    }
  }
  PipelineConfig cfg;
  try {
    cfg.domain = domain_from_string(j.at("domain").get<std::string>());
    cfg.scale = j.value("scale", 4);
    const std::string order = j.value("order", std::string("fixed"));
    if (order == "fixed") {
      cfg.order = StageOrder::Fixed;
    } else if (order == "shuffle_per_round") {
      cfg.order = StageOrder::ShufflePerRound;
    } else {
      throw ConfigError("unknown stage order '" + order + "'");
    }
    for (const auto& round : j.at("rounds")) {
      std::vector<StageSpec> specs;
      for (const auto& s : round) specs.push_back(spec_from(s));
      cfg.rounds.push_back(std::move(specs));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed pipeline: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig default_specialist_pipeline(int scale) {
  PipelineConfig cfg;
  cfg.domain = DomainTag::Specialist;
  cfg.scale = scale;
  cfg.rounds = {{}};
  return cfg;
}

PipelineConfig default_generalist_pipeline(int scale) {
  const std::vector<Interp> all_modes{Interp::Bicubic, Interp::Bilinear, Interp::Nearest};
  StageSpec blur1{.kind = "gaussian_blur", .sigma = {0.2, 3.0}};
  StageSpec resize1{.kind = "resize", .factor = {0.5, 1.0}, .interps = all_modes};
  StageSpec noise1{.kind = "gaussian_noise", .sigma = {1.0 / 255.0, 25.0 / 255.0}};
  StageSpec jpeg1{.kind = "jpeg", .quality = {30.0, 95.0}};
  StageSpec blur2{.kind = "gaussian_blur", .sigma = {0.2, 1.5}};
  StageSpec resize2{.kind = "resize", .complete_scale = true, .interps = all_modes};
  StageSpec noise2{.kind = "gaussian_noise", .sigma = {1.0 / 255.0, 20.0 / 255.0}};
  StageSpec jpeg2{.kind = "jpeg", .quality = {30.0, 95.0}};

  PipelineConfig cfg;
  cfg.domain = DomainTag::Generalist;
  cfg.scale = scale;
  cfg.rounds = {{blur1, resize1, noise1, jpeg1}, {blur2, resize2, noise2, jpeg2}};
  return cfg;
}

PipelineConfig pseudo_real_pipeline(int scale) {
  StageSpec blur{.kind = "gaussian_blur", .sigma = {1.5, 1.5}};
  StageSpec down{.kind = "resize", .complete_scale = true, .interps = {Interp::Bicubic}};
  StageSpec noise{.kind = "gaussian_noise", .sigma = {10.0 / 255.0, 10.0 / 255.0}};
  StageSpec jpeg{.kind = "jpeg", .quality = {60.0, 60.0}};
  PipelineConfig cfg;
  cfg.domain = DomainTag::PseudoReal;
  cfg.scale = scale;
  cfg.rounds = {{blur, down, noise, jpeg}};
  return cfg;
}

void check_generalist_dominates(const PipelineConfig& specialist,
                                const PipelineConfig& generalist) {
  if (generalist.stage_count() < 2 * specialist.stage_count() ||
      generalist.stage_count() <= specialist.stage_count()) {
    throw ConfigError("generalist pipeline must have at least twice the specialist's stages");
  }
}

namespace {

double draw_uniform(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

double draw_log_uniform(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  const double v = std::exp(std::uniform_real_distribution<double>(std::log(r.lo), std::log(r.hi))(rng));
  return std::clamp(v, r.lo, r.hi);
}

int draw_int(const Range& r, std::mt19937_64& rng) {
  const int lo = static_cast<int>(std::ceil(r.lo));
  const int hi = static_cast<int>(std::floor(r.hi));
  if (lo >= hi) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

DegradationRecipe sample_recipe(const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  DegradationRecipe recipe;
  recipe.final_scale = cfg.scale;
  recipe.seed = seed;
  double product = 1.0;
  for (const auto& round : cfg.rounds) {
    std::vector<std::size_t> order(round.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.order == StageOrder::ShufflePerRound) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const StageSpec& s = round[idx];
      if (s.kind == "gaussian_blur") {
        recipe.stages.emplace_back(GaussianBlur{draw_log_uniform(s.sigma, rng)});
      } else if (s.kind == "anisotropic_blur") {
        const double sx = draw_log_uniform(s.sigma_x, rng);
        const double sy = draw_log_uniform(s.sigma_y, rng);
        recipe.stages.emplace_back(AnisotropicBlur{sx, sy, draw_uniform(s.theta, rng)});
      } else if (s.kind == "gaussian_noise") {
        const double sigma = draw_log_uniform(s.sigma, rng);
        recipe.stages.emplace_back(GaussianNoise{sigma, rng()});
      } else if (s.kind == "resize") {
        const Interp mode =
            s.interps[std::uniform_int_distribution<std::size_t>(0, s.interps.size() - 1)(rng)];
        const double factor =
            s.complete_scale ? 1.0 / (cfg.scale * product) : draw_uniform(s.factor, rng);
        product *= factor;
        recipe.stages.emplace_back(ResizeStage{mode, factor});
      } else if (s.kind == "jpeg") {
        recipe.stages.emplace_back(JpegStage{draw_int(s.quality, rng)});
      }
    }
  }
  return recipe;
}

// ---------------------------------------------------------------------------
// Manifests and synthesis
// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::string portable_path(const fs::path& p, const fs::path& base) {
  const fs::path abs_p = fs::weakly_canonical(fs::absolute(p));
  const fs::path abs_base = fs::weakly_canonical(fs::absolute(base));
  const fs::path rel = abs_p.lexically_relative(abs_base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return abs_p.generic_string();
}

}  // namespace

json to_json(const Manifest& m, const fs::path& base_dir) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"hr_path", portable_path(e.hr_path, base_dir)},
                       {"lr_path", portable_path(e.lr_path, base_dir)},
                       {"recipe", to_json(e.recipe)},
                       {"seed", e.seed}});
  }
  return {{"version", m.version}, {"scale", m.scale}, {"domain", m.domain}, {"entries", entries}};
}

Manifest manifest_from_json(const json& j, const fs::path& base_dir) {
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    m.scale = j.at("scale").get<int>();
    m.domain = j.value("domain", std::string());
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      fs::path hr = e.at("hr_path").get<std::string>();
      fs::path lr = e.at("lr_path").get<std::string>();
      entry.hr_path = hr.is_absolute() ? hr : base_dir / hr;
      entry.lr_path = lr.is_absolute() ? lr : base_dir / lr;
      entry.recipe = recipe_from_json(e.at("recipe"));
      entry.seed = e.at("seed").get<std::uint64_t>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  if (m.version != 1) throw ConfigError("unsupported manifest version " + std::to_string(m.version));
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(m, path.parent_path()).dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest " + path.string());
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Manifest synthesize_dataset(const fs::path& hr_dir, const PipelineConfig& cfg,
                            const fs::path& out_dir, std::uint64_t seed) {
  cfg.validate();
  const auto files = list_pngs(hr_dir);
  if (files.empty()) throw IoError("no PNG images in " + hr_dir.string());

  std::error_code ec;
  fs::create_directories(out_dir / "lr", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "lr").string() + ": " + ec.message());

  Manifest manifest;
  manifest.scale = cfg.scale;
  manifest.domain = to_string(cfg.domain);
  manifest.entries.resize(files.size());

  // Each image's randomness depends only on (seed, index), so entries can be
  // produced in any order.
  for (std::size_t i = 0; i < files.size(); ++i) {
    ImageTensor hr = read_png(files[i]);
    fs::path hr_path = files[i];
    ImageTensor cropped = mod_crop(hr, cfg.scale);
    if (!cropped.same_shape(hr)) {
      fs::create_directories(out_dir / "hr");
      hr_path = out_dir / "hr" / files[i].filename();
      write_png(cropped, hr_path);
    }
    const std::uint64_t item_seed = mix_seed(seed, i);
    DegradationRecipe recipe = sample_recipe(cfg, item_seed);
    ImageTensor lr = apply_recipe(cropped, recipe);
    const fs::path lr_path = out_dir / "lr" / files[i].filename().replace_extension(".png");
    write_png(lr, lr_path);
    manifest.entries[i] = ManifestEntry{hr_path, lr_path, std::move(recipe), item_seed};
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace pairdist
