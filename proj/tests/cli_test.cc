// Copyright 2026 The EASN Authors. All Rights Reserved.
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

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "commands.h"
#include "easn/codec.h"
#include "easn/image_io.h"
#include "easn/train.h"
#include "easn/weights_io.h"
#include "test_util.h"

namespace easn {
namespace {

namespace fs = std::filesystem;
using testing::ScopedTempDir;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun Easn(std::vector<std::string> args) {
  args.insert(args.begin(), "easn");
  std::ostringstream out, err;
  CliRun r;
  r.code = RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t CountLines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

// One short training run shared by every test in the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScopedTempDir;
    const std::string ini =
        "[model]\nvariant = EASN-C\nstages = 2\nbase_channels = 4\nlatent_channels = 6\n"
        "[train]\nbatch = 2\ncrop = 16\nmax_steps = 8\n"
        "[synthetic]\ncount = 5\nwidth = 20\nheight = 20\n"
        "[paths]\noutput = run\n"
        "[analysis]\nflat_region = 0,0,8,8\n"
        "[ablate]\nvariants = GDN, EASN-A\n";
    WriteFileAtomic(Path("run.ini"), std::vector<uint8_t>(ini.begin(), ini.end()));
    const CliRun r = Easn({"train", "--config", Path("run.ini")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto images = SyntheticImages(2, 13, 11, 8);
    fs::create_directories(Path("imgs"));
    WriteImage(Path("imgs/a.png"), images[0]);
    WriteImage(Path("imgs/b.ppm"), images[1]);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string Path(const std::string& name) { return (dir_->path() / name).string(); }
  static std::string Weights() { return Path("run/weights.easw"); }

  static ScopedTempDir* dir_;
};

ScopedTempDir* CliTest::dir_ = nullptr;

TEST(CliUsageTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Easn({}).code, kExitUsage);
  EXPECT_EQ(Easn({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(Easn({"compress", "x.png"}).code, kExitUsage);  // missing --weights
  EXPECT_EQ(Easn({"synth", "--out", "x", "--count", "0"}).code, kExitUsage);
  EXPECT_EQ(Easn({"gradcheck", "--variant", "EASN-Q"}).code, kExitUsage);
  const CliRun help = Easn({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("compress"), std::string::npos);
}

TEST(CliUsageTest, MissingFilesExitThree) {
  ScopedTempDir dir;
  const CliRun r = Easn({"compress", "--weights", (dir / "none.easw").string(), "--out",
                        (dir / "o.easn").string(), (dir / "none.png").string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(CliUsageTest, GradcheckGdnPasses) {
  const CliRun r = Easn({"gradcheck", "--variant", "GDN", "--seed", "1"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("PASS GDN seed 1"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(CliUsageTest, SynthWritesImages) {
  ScopedTempDir dir;
  const CliRun r = Easn({"synth", "--out", dir.path().string(), "--count", "3", "--width",
                        "10", "--height", "6", "--seed", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Image im = ReadImage(dir / "synth_0002.png");
  EXPECT_EQ(im.width, 10);
  EXPECT_EQ(im.pixels, SyntheticImages(3, 10, 6, 2)[2].pixels);
}

TEST_F(CliTest, TrainOutputs) {
  EXPECT_TRUE(fs::exists(Weights()));
  const std::string log = Slurp(Path("run/train_log.csv"));
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,step,train_loss,val_loss,val_bpp,val_psnr_db,lr");
  const std::string rd = Slurp(Path("run/rd_summary.csv"));
  EXPECT_NE(rd.find("EASN-C@validation4"), std::string::npos) << rd;
  EXPECT_NE(rd.find("EASN-C@mean"), std::string::npos) << rd;
  EXPECT_EQ(LoadWeights(Weights()).model.config().variant, Variant::kEasnC);
}

TEST_F(CliTest, CompressDecompressRoundTrip) {
  CliRun r = Easn({"compress", "--weights", Weights(), "--out", Path("a.easn"),
                  Path("imgs/a.png")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, 4), "bpp ");
  r = Easn({"decompress", "--weights", Weights(), "--out", Path("a_dec.png"), Path("a.easn")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const LoadedModel m = LoadWeights(Weights());
  const Image original = ReadImage(Path("imgs/a.png"));
  EXPECT_EQ(ReadImage(Path("a_dec.png")).pixels,
            ReconstructInMemory(m.model, original).pixels);
  // Corrupt stream: runtime failure, no output.
  std::string bytes = Slurp(Path("a.easn"));
  bytes.resize(bytes.size() - 3);
  WriteFileAtomic(Path("cut.easn"), std::vector<uint8_t>(bytes.begin(), bytes.end()));
  r = Easn({"decompress", "--weights", Weights(), "--out", Path("cut.png"), Path("cut.easn")});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_FALSE(fs::exists(Path("cut.png")));
}

TEST_F(CliTest, EvalWritesPerImageRowsAndMean) {
  const CliRun r = Easn({"eval", "--weights", Weights(), "--out", Path("rd.csv"), Path("imgs")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = Slurp(Path("rd.csv"));
  EXPECT_EQ(CountLines(csv), 4u) << csv;
  EXPECT_NE(csv.find("EASN-C@a.png,"), std::string::npos);
  EXPECT_NE(csv.find("EASN-C@b.ppm,"), std::string::npos);
  EXPECT_NE(csv.find("EASN-C@mean,"), std::string::npos);
  EXPECT_EQ(Easn({"eval", "--weights", Weights(), "--out", Path("rd2.csv"), Path("nowhere")})
                .code,
            kExitUsage);
}

TEST_F(CliTest, VisualizeWritesMapsAndRejectsUnknownTap) {
  CliRun r = Easn({"visualize", "--weights", Weights(), "--out", Path("vis"), "--config",
                  Path("run.ini"), Path("imgs/a.png")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string id = ModelIdHex(LoadWeights(Weights()).id);
  EXPECT_TRUE(fs::exists(Path("vis/a_loggrad.pgm")));
  EXPECT_TRUE(fs::exists(Path("vis/a_" + id + "_first.pgm")));
  EXPECT_TRUE(fs::exists(Path("vis/a_" + id + "_first.pgm.meta")));
  EXPECT_EQ(CountLines(Slurp(Path("vis/a_hf_stats.csv"))), 2u);
  r = Easn({"visualize", "--weights", Weights(), "--out", Path("vis2"), "--tap", "back",
           Path("imgs/a.png")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("valid taps: first"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(Path("vis2")));
}

TEST_F(CliTest, AblateComparesVariants) {
  const CliRun r = Easn({"ablate", "--config", Path("run.ini"), "--out", Path("abl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = Slurp(Path("abl/ablation.csv"));
  EXPECT_EQ(CountLines(csv), 3u) << csv;
  EXPECT_EQ(csv.find("GDN,"), csv.find('\n') + 1);
  EXPECT_NE(csv.find("EASN-A,"), std::string::npos);
  EXPECT_TRUE(fs::exists(Path("abl/ablation_GDN_log.csv")));
  EXPECT_TRUE(fs::exists(Path("abl/ablation_EASN-A_log.csv")));
}

}  // namespace
}  // namespace easn
