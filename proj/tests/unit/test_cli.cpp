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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "pairdist/tensor_archive.hpp"
#include "test_util.hpp"

namespace pairdist::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using pairdist::testing::TempDir;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "pairdist");
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

TEST(Cli, HelpListsEveryFlag) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* s : {"synth", "train", "eval", "analyze", "gradcheck", "--config", "--out", "--seed", "--mode",
                        "--iters"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  EXPECT_EQ(run({"train", "--help"}).code, kExitOk);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"explode"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--out", "x"}).code, kExitUsage);                            // no --config
  EXPECT_EQ(run({"train", "--config", "c.json", "--out", "x", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", "c.json", "--out", "x", "--iters", "-3"}).code, kExitUsage);
  TempDir dir("cli_usage");
  EXPECT_EQ(run({"synth", "--config", (dir / "missing.json").string(), "--out", (dir / "o").string()}).code, kExitUsage);
  write(dir / "bad.json", {{"schema_version", 1}, {"surprise", true}});
  const CliRun r = run({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("surprise"), std::string::npos);
}

class CliFlow : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const fs::path d = dir_->path();
    write(d / "lab.json", {{"schema_version", 1}, {"seed", 1}, {"procedural", {{"count", 8}, {"height", 32}, {"width", 32}}},
                           {"domain", "D_S"}});
    write(d / "unl.json", {{"schema_version", 1}, {"seed", 2}, {"procedural", {{"count", 8}, {"height", 32}, {"width", 32}}},
                           {"domain", "pseudo_real"}});
    ASSERT_EQ(run({"synth", "--config", (d / "lab.json").string(), "--out", (d / "lab").string()}).code, kExitOk);
    ASSERT_EQ(run({"synth", "--config", (d / "unl.json").string(), "--out", (d / "unl").string()}).code, kExitOk);
    write(d / "train.json",
          {{"schema_version", 1},
           {"mode", "supervised_only"},
           {"seed", 4},
           {"batch_size", 4},
           {"lr_size", 4},
           {"total_iters", 4},
           {"halve_at", 2},
           {"checkpoint_every", 4},
           {"generator", {{"num_feat", 8}, {"num_blocks", 1}, {"growth", 4}, {"dense_layers", 2}}},
           {"discriminator", {{"num_feat", 8}}},
           {"data", {{"labeled_manifest", "lab/manifest.json"}, {"unlabeled_manifest", "unl/manifest.json"}}}});
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path p(const std::string& s) { return dir_->path() / s; }
  static TempDir* dir_;
};

TempDir* CliFlow::dir_ = nullptr;

TEST_F(CliFlow, SynthWritesManifestAndIsReproducible) {
  EXPECT_TRUE(fs::exists(p("lab/manifest.json")));
  ASSERT_EQ(run({"synth", "--config", p("unl.json").string(), "--out", p("unl2").string()}).code, kExitOk);
  const auto a = load_manifest(p("unl/manifest.json")), b = load_manifest(p("unl2/manifest.json"));
  ASSERT_EQ(a.entries.size(), 8u);
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    EXPECT_EQ(read_file_bytes(a.entries[i].lr_path), read_file_bytes(b.entries[i].lr_path));
  EXPECT_FALSE(fs::exists(p("unl2/.lock")));
}

TEST_F(CliFlow, TrainWithOverrides) {
  const CliRun r = run({"train", "--config", p("train.json").string(), "--out", p("t1").string(), "--mode", "pdd_ema",
                     "--iters", "10"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(p("t1/ckpt_0000010.bin")));
  std::ifstream log(p("t1/log.jsonl"));
  int lines = 0;
  for (std::string l; std::getline(log, l);) ++lines;
  EXPECT_EQ(lines, 10);
  const json cfg = json::parse(std::ifstream(p("t1/config.json")));
  EXPECT_EQ(cfg.at("mode"), "pdd_ema");
  EXPECT_EQ(cfg.at("total_iters"), 10);
  EXPECT_EQ(run({"train", "--config", p("train.json").string(), "--out", p("t2").string(), "--mode", "nope"}).code,
            kExitUsage);
}

TEST_F(CliFlow, TrainIsLossTrajectoryReproducible) {
  for (const char* out : {"r1", "r2"})
    ASSERT_EQ(run({"train", "--config", p("train.json").string(), "--out", p(out).string(), "--seed", "8"}).code, kExitOk);
  std::ifstream a(p("r1/log.jsonl")), b(p("r2/log.jsonl"));
  for (std::string la, lb; std::getline(a, la) && std::getline(b, lb);) EXPECT_EQ(la, lb);
  EXPECT_EQ(json::parse(std::ifstream(p("r1/config.json"))).at("seed"), 8);
}

TEST_F(CliFlow, EvalIsByteIdentical) {
  ASSERT_EQ(run({"train", "--config", p("train.json").string(), "--out", p("e0").string()}).code, kExitOk);
  write(p("eval.json"), {{"schema_version", 1}, {"checkpoint", "e0/ckpt_0000004.bin"}, {"manifest", "unl/manifest.json"},
                         {"color_correction", true}});
  ASSERT_EQ(run({"eval", "--config", p("eval.json").string(), "--out", p("ev1").string()}).code, kExitOk);
  ASSERT_EQ(run({"eval", "--config", p("eval.json").string(), "--out", p("ev2").string()}).code, kExitOk);
  EXPECT_EQ(read_file_bytes(p("ev1/eval_report.json")), read_file_bytes(p("ev2/eval_report.json")));
  write(p("eval_bad.json"), {{"schema_version", 1}, {"checkpoint", "nope.bin"}, {"manifest", "unl/manifest.json"}});
  EXPECT_EQ(run({"eval", "--config", p("eval_bad.json").string(), "--out", p("ev3").string()}).code, kExitDomain);
}

TEST_F(CliFlow, AnalyzeWritesComparison) {
  ASSERT_EQ(run({"train", "--config", p("train.json").string(), "--out", p("a0").string()}).code, kExitOk);
  write(p("an.json"), {{"schema_version", 1},
                       {"before", "a0/ckpt_0000004.bin"},
                       {"after", "a0/ckpt_0000004.bin"},
                       {"labeled_manifest", "lab/manifest.json"},
                       {"unlabeled_manifest", "unl/manifest.json"},
                       {"tile", 16}});
  const CliRun r = run({"analyze", "--config", p("an.json").string(), "--out", p("an").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(std::ifstream(p("an/analysis.json")));
  EXPECT_DOUBLE_EQ(j.at("before").at("kl_labeled_unlabeled").get<double>(),
                   j.at("after").at("kl_labeled_unlabeled").get<double>());
  for (const char* f : {"kl.svg", "projection_before.svg", "projection_after.svg"}) EXPECT_TRUE(fs::exists(p("an") / f));
}

TEST_F(CliFlow, LockBlocksConcurrentWriters) {
  fs::create_directories(p("locked"));
  std::ofstream(p("locked/.lock")) << ::getpid() << "\n";  // a live owner: this process
  const CliRun r = run({"train", "--config", p("train.json").string(), "--out", p("locked").string()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("locked/log.jsonl")));
  // A lock left behind by a dead process is reclaimed.
  std::ofstream(p("locked/.lock"), std::ios::trunc) << 999999999 << "\n";
  EXPECT_EQ(run({"train", "--config", p("train.json").string(), "--out", p("locked").string()}).code, kExitOk);
  EXPECT_FALSE(fs::exists(p("locked/.lock")));
}

TEST(CliGradcheck, WritesTableAndPasses) {
  TempDir dir("cli_gc");
  const CliRun r = run({"gradcheck", "--out", (dir / "g1").string()});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_TRUE(fs::exists(dir / "g1" / "gradcheck.json"));
  EXPECT_TRUE(fs::exists(dir / "g1" / "gradcheck.txt"));
  EXPECT_TRUE(json::parse(std::ifstream(dir / "g1" / "gradcheck.json")).at("ok").get<bool>());
  // An impossible tolerance makes the suite fail: exit 1.
  std::ofstream(dir / "strict.json") << R"({"schema_version": 1, "tolerance": 1e-15})";
  EXPECT_EQ(run({"gradcheck", "--config", (dir / "strict.json").string(), "--out", (dir / "g2").string()}).code,
            kExitDomain);
}

}  // namespace
}  // namespace pairdist::cli
