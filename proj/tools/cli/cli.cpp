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

#include "cli.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "pairdist/checkpoint.hpp"
#include "pairdist/degradation.hpp"
#include "pairdist/error.hpp"
#include "pairdist/evalkit.hpp"
#include "pairdist/gradcheck.hpp"
#include "pairdist/procedural.hpp"
#include "pairdist/trainer.hpp"

namespace pairdist::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::int64_t> iters;
};

// Exclusive ownership of a run directory for the lifetime of the command.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return;
      }
      if (errno != EEXIST) throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
      if (!stale()) break;
      fs::remove(path_, ec);
    }
    throw InvalidState(dir.string() + " is locked by another running process (" + path_.string() + ")");
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  // A lock whose owner no longer exists.
  bool stale() const {
    std::ifstream in(path_);
    long pid = 0;
    if (!(in >> pid) || pid <= 0) return true;
    return ::kill(static_cast<pid_t>(pid), 0) != 0 && errno == ESRCH;
  }

  fs::path path_;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Runs `fn` over the keys of `j`, rejecting anything it does not claim.
template <class Fn>
void for_keys(const json& j, const std::string& where, Fn&& fn) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!fn(k, v)) throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class T>
T get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

int run_synth(const Flags& f, std::ostream& out) {
  const fs::path cfg_path = f.config;
  const json j = read_json(cfg_path);
  const fs::path base = cfg_path.parent_path();
  std::uint64_t seed = 0;
  std::optional<fs::path> hr_dir;
  std::optional<json> procedural;
  std::optional<PipelineConfig> pipeline;
  std::optional<std::string> domain;
  int scale = 4;
  for_keys(j, "", [&](const std::string& k, const json& v) {
    if (k == "schema_version") {
      if (get<int>(v, k) != 1) throw ConfigError("unsupported schema_version");
    } else if (k == "seed") seed = get<std::uint64_t>(v, k);
    else if (k == "hr_dir") hr_dir = resolve(base, get<std::string>(v, k));
    else if (k == "procedural") procedural = v;
    else if (k == "pipeline") pipeline = pipeline_from_json(v);
    else if (k == "domain") domain = get<std::string>(v, k);
    else if (k == "scale") scale = get<int>(v, k);
    else return false;
    return true;
  });
  if (f.seed) seed = *f.seed;
  if (hr_dir.has_value() == procedural.has_value()) throw ConfigError("set exactly one of hr_dir and procedural");
  if (pipeline.has_value() == domain.has_value()) throw ConfigError("set exactly one of pipeline and domain");
  if (domain) {
    switch (domain_from_string(*domain)) {
      case DomainTag::Specialist: pipeline = default_specialist_pipeline(scale); break;
      case DomainTag::Generalist: pipeline = default_generalist_pipeline(scale); break;
      case DomainTag::PseudoReal: pipeline = pseudo_real_pipeline(scale); break;
    }
  }
  pipeline->validate();

  const fs::path out_dir = f.out;
  RunLock lock(out_dir);
  if (procedural) {
    int count = 0, height = 0, width = 0;
    for_keys(*procedural, "procedural", [&](const std::string& k, const json& v) {
      if (k == "count") count = get<int>(v, k);
      else if (k == "height") height = get<int>(v, k);
      else if (k == "width") width = get<int>(v, k);
      else return false;
      return true;
    });
    if (count < 1 || height < 1 || width < 1) throw ConfigError("procedural needs count, height, width >= 1");
    hr_dir = out_dir / "hr_source";
    write_procedural_corpus(*hr_dir, count, height, width, mix_seed(seed, 0x9E0));
  }
  const Manifest m = synthesize_dataset(*hr_dir, *pipeline, out_dir, seed);
  out << "synth: " << m.entries.size() << " images (" << m.domain << ", x" << m.scale << ") -> "
      << (out_dir / "manifest.json").string() << '\n';
  return kExitOk;
}

int run_train(const Flags& f, std::ostream& out) {
  const fs::path cfg_path = f.config;
  const json j = read_json(cfg_path);
  TrainConfig cfg;
  {
    json patched = j;
    // Overrides go through the parser so the result is validated once.
    if (f.seed) patched["seed"] = *f.seed;
    if (f.mode) patched["mode"] = *f.mode;
    cfg = train_config_from_json(patched, cfg_path.parent_path());
  }
  if (f.iters) {
    override_iters(cfg, *f.iters);
    cfg.validate();
  }
  const fs::path run_dir = f.out;
  RunLock lock(run_dir);
  torch::set_num_threads(1);
  const RunArtifacts art = fit(cfg, run_dir);
  out << "train: " << to_string(cfg.mode) << ", " << cfg.total_iters << " iterations -> "
      << art.final_checkpoint.string() << '\n';
  return art.complete ? kExitOk : kExitDomain;
}

int run_eval(const Flags& f, std::ostream& out) {
  const fs::path cfg_path = f.config;
  const json j = read_json(cfg_path);
  const fs::path base = cfg_path.parent_path();
  fs::path checkpoint, manifest;
  std::optional<fs::path> csv;
  bool cc = false;
  std::string role = "specialist";
  for_keys(j, "", [&](const std::string& k, const json& v) {
    if (k == "schema_version") {
      if (get<int>(v, k) != 1) throw ConfigError("unsupported schema_version");
    } else if (k == "checkpoint") checkpoint = resolve(base, get<std::string>(v, k));
    else if (k == "manifest") manifest = resolve(base, get<std::string>(v, k));
    else if (k == "color_correction") cc = get<bool>(v, k);
    else if (k == "role") role = get<std::string>(v, k);
    else if (k == "external_metrics_csv") csv = resolve(base, get<std::string>(v, k));
    else return false;
    return true;
  });
  if (checkpoint.empty() || manifest.empty()) throw ConfigError("eval needs checkpoint and manifest");
  if (role != "specialist" && role != "generalist") throw ConfigError("role must be specialist or generalist");
  const fs::path out_dir = f.out;
  RunLock lock(out_dir);
  torch::set_num_threads(1);
  EvalReport rep = evaluate_checkpoint(checkpoint, manifest, cc, role);
  if (csv) merge_external_metrics(rep, *csv);
  write_eval_report(rep, out_dir / "eval_report.json");
  out << "eval: " << rep.rows.size() << " images, PSNR-Y " << rep.psnr_y << " dB, SSIM-Y " << rep.ssim_y << '\n';
  return kExitOk;
}

int run_analyze(const Flags& f, std::ostream& out) {
  const fs::path cfg_path = f.config;
  const json j = read_json(cfg_path);
  const fs::path base = cfg_path.parent_path();
  fs::path before, after, labeled, unlabeled;
  std::string role_before = "specialist", role_after = "specialist";
  DomainGapOptions opts;
  ExtractorConfig ex_cfg;
  int max_images = 0;
  for_keys(j, "", [&](const std::string& k, const json& v) {
    if (k == "schema_version") {
      if (get<int>(v, k) != 1) throw ConfigError("unsupported schema_version");
    } else if (k == "before") before = resolve(base, get<std::string>(v, k));
    else if (k == "after") after = resolve(base, get<std::string>(v, k));
    else if (k == "labeled_manifest") labeled = resolve(base, get<std::string>(v, k));
    else if (k == "unlabeled_manifest") unlabeled = resolve(base, get<std::string>(v, k));
    else if (k == "role_before") role_before = get<std::string>(v, k);
    else if (k == "role_after") role_after = get<std::string>(v, k);
    else if (k == "tap") opts.tap = TapId::parse(get<std::string>(v, k));
    else if (k == "tile") opts.tile = get<int>(v, k);
    else if (k == "max_images") max_images = get<int>(v, k);
    else if (k == "extractor") {
      for_keys(v, "extractor", [&](const std::string& ek, const json& ev) {
        if (ek == "kind") ex_cfg.kind = get<std::string>(ev, ek);
        else if (ek == "seed") ex_cfg.seed = get<std::uint64_t>(ev, ek);
        else if (ek == "weights") ex_cfg.weights = resolve(base, get<std::string>(ev, ek));
        else return false;
        return true;
      });
    } else return false;
    return true;
  });
  if (before.empty() || after.empty() || labeled.empty() || unlabeled.empty()) {
    throw ConfigError("analyze needs before, after, labeled_manifest and unlabeled_manifest");
  }
  const fs::path out_dir = f.out;
  RunLock lock(out_dir);
  torch::set_num_threads(1);
  const FeatureExtractor ex = build_extractor(ex_cfg);
  const auto lr_l = load_lr_images(load_manifest(labeled), max_images);
  const auto lr_u = load_lr_images(load_manifest(unlabeled), max_images);
  auto pick = [](const Checkpoint& ck, const std::string& role) {
    if (role == "specialist") return ck.pair.specialist;
    if (role == "generalist") return ck.pair.generalist;
    throw ConfigError("role must be specialist or generalist");
  };
  const DomainGapResult rb =
      domain_gap_for_model(generator_upscaler(pick(load_checkpoint(before), role_before)), lr_l, lr_u, ex, opts);
  const DomainGapResult ra =
      domain_gap_for_model(generator_upscaler(pick(load_checkpoint(after), role_after)), lr_l, lr_u, ex, opts);
  write_json(out_dir / "analysis.json",
             {{"tap", opts.tap.name()}, {"tile", opts.tile}, {"before", to_json(rb)}, {"after", to_json(ra)},
              {"kl_decreased", ra.kl < rb.kl}});
  write_projection_svg(rb, out_dir / "projection_before.svg", "Before adaptation");
  write_projection_svg(ra, out_dir / "projection_after.svg", "After adaptation");
  write_kl_svg({{"before", rb.kl}, {"after", ra.kl}}, out_dir / "kl.svg", "KL(labeled || unlabeled) of predictions");
  out << "analyze: KL before " << rb.kl << ", after " << ra.kl << '\n';
  return kExitOk;
}

int run_gradcheck(const Flags& f, std::ostream& out) {
  GradcheckOptions opts;
  if (!f.config.empty()) {
    const json j = read_json(f.config);
    for_keys(j, "", [&](const std::string& k, const json& v) {
      if (k == "schema_version") {
        if (get<int>(v, k) != 1) throw ConfigError("unsupported schema_version");
      } else if (k == "step") opts.step = get<double>(v, k);
      else if (k == "tolerance") opts.tolerance = get<double>(v, k);
      else if (k == "min_pass_fraction") opts.min_pass_fraction = get<double>(v, k);
      else if (k == "size") opts.size = get<int>(v, k);
      else if (k == "seed") opts.seed = get<std::uint64_t>(v, k);
      else return false;
      return true;
    });
  }
  if (f.seed) opts.seed = *f.seed;
  if (!(opts.step > 0.0) || !(opts.tolerance > 0.0) || opts.size < 1) {
    throw ConfigError("gradcheck needs step > 0, tolerance > 0 and size >= 1");
  }
  const fs::path out_dir = f.out;
  RunLock lock(out_dir);
  torch::set_num_threads(1);
  const auto rows = run_gradcheck_suite(opts);
  json arr = json::array();
  bool all = true;
  for (const auto& r : rows) {
    arr.push_back(to_json(r));
    all = all && r.ok;
  }
  const std::string table = format_gradcheck_table(rows);
  write_json(out_dir / "gradcheck.json", {{"step", opts.step}, {"tolerance", opts.tolerance}, {"rows", arr}, {"ok", all}});
  std::ofstream(out_dir / "gradcheck.txt") << table;
  out << table;
  return all ? kExitOk : kExitDomain;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pairdist: pairwise-distance distillation for real-world super-resolution", "pairdist"};
  app.require_subcommand(1);
  Flags f;
  std::string mode;
  std::int64_t iters = 0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", f.config, "JSON config file");
    if (config_required) c->required();
    sub->add_option("--out", f.out, "output directory (created; locked while running)")->required();
    sub->add_option("--seed", seed, "global seed, overrides the config seed");
  };
  auto* synth = app.add_subcommand("synth", "degrade HR images into a paired dataset with a manifest");
  add_common(synth, true);
  auto* train = app.add_subcommand("train", "train a model pair; writes checkpoints, log.jsonl, eval_summary.json");
  add_common(train, true);
  train->add_option("--mode", mode, "pdd_static | pdd_ema | single_fixed | naive_distill | supervised_only");
  train->add_option("--iters", iters, "total iterations, overrides the config")->check(CLI::PositiveNumber);
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM on the Y channel of a checkpoint over a manifest");
  add_common(eval, true);
  auto* analyze = app.add_subcommand("analyze", "feature-distribution gap (KL, PCA plot) before vs after adaptation");
  add_common(analyze, true);
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  add_common(grad, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    // Top-level help lists every subcommand's flags as well.
    const bool top = !app.got_subcommand(synth) && !app.got_subcommand(train) && !app.got_subcommand(eval) &&
                     !app.got_subcommand(analyze) && !app.got_subcommand(grad);
    out << (top ? app.help("", CLI::AppFormatMode::All) : app.help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  for (auto* sub : {synth, train, eval, analyze, grad}) {
    if (sub->get_option("--seed")->count()) f.seed = seed;
  }
  if (train->parsed()) {
    if (train->get_option("--mode")->count()) f.mode = mode;
    if (train->get_option("--iters")->count()) f.iters = iters;
  }

  try {
    if (synth->parsed()) return run_synth(f, out);
    if (train->parsed()) return run_train(f, out);
    if (eval->parsed()) return run_eval(f, out);
    if (analyze->parsed()) return run_analyze(f, out);
    if (grad->parsed()) return run_gradcheck(f, out);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const NonFiniteLoss& e) {
    err << e.what() << "\ndiagnostic: " << e.report() << '\n';
    return kExitDomain;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitDomain;
  } catch (const c10::Error& e) {
    err << "tensor error: " << e.what_without_backtrace() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace pairdist::cli
