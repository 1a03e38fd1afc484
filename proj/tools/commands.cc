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

#include "commands.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "easn/analysis.h"
#include "easn/codec.h"
#include "easn/config.h"
#include "easn/error.h"
#include "easn/grad_suite.h"
#include "easn/train.h"
#include "easn/weights_io.h"

namespace easn {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::vector<std::string> weights;
  std::string out;
  std::optional<uint64_t> seed;
  std::string variant;
  std::string tap;
  std::string input;
  int count = 64;
  int width = 32;
  int height = 32;
};

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileAtomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

void EnsureDirectory(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create directory {}: {}", dir.string(), ec.message());
}

int ThreadLimit() {
  const char* env = std::getenv("EASN_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  EASN_REQUIRE(*end == '\0' && n >= 1 && n <= 256, "EASN_THREADS must be in [1, 256], got '{}'",
               env);
  return static_cast<int>(n);
}

RunConfig LoadConfigWithOverrides(const Options& o) {
  RunConfig config = LoadRunConfig(o.config);
  if (o.seed) config.SetSeed(*o.seed);
  if (!o.variant.empty()) {
    const std::vector<Variant> v = ParseVariantList(o.variant);
    EASN_REQUIRE(v.size() == 1, "--variant takes a single name here");
    config.model.variant = v[0];
  }
  if (!o.out.empty()) config.output = o.out;
  config.Validate();
  return config;
}

std::string TrainLogCsv(const TrainLog& log) {
  std::string csv = "epoch,step,train_loss,val_loss,val_bpp,val_psnr_db,lr\n";
  for (const EpochLog& e : log.epochs) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", e.epoch, e.step, e.train_loss, e.val_loss,
                       e.val_bpp, e.val_psnr, e.lr);
  }
  return csv;
}

RDPoint MeasureImage(const Model& model, const ModelId& id, double lambda,
                     const Image& image, const std::string& tag) {
  const CompressedImage c = CompressImage(model, id, image);
  const Image decoded = DecompressImage(model, id, c.bytes);
  return {tag, lambda, Bpp(c.bytes.size(), image.width, image.height), Psnr(image, decoded)};
}

RDPoint MeanPoint(std::span<const RDPoint> points, const std::string& tag, double lambda) {
  RDPoint mean{tag, lambda, 0.0, 0.0};
  for (const RDPoint& p : points) {
    mean.bpp += p.bpp;
    mean.psnr_db += p.psnr_db;
  }
  mean.bpp /= static_cast<double>(points.size());
  mean.psnr_db /= static_cast<double>(points.size());
  return mean;
}

int CmdTrain(const Options& o, std::ostream& out) {
  const RunConfig config = LoadConfigWithOverrides(o);
  const std::vector<Image> images = LoadTrainingImages(config);
  const std::string name(VariantName(config.model.variant));
  TrainResult result = Train(images, config.model, config.train, [&](const EpochLog& e) {
    fmt::print(out, "epoch {} step {} train_loss {:.6f} val_loss {:.6f} lr {}\n", e.epoch,
               e.step, e.train_loss, e.val_loss, e.lr);
  });

  const ModelId id = ComputeModelId(result.model, config.train.lambda);
  std::vector<RDPoint> points;
  const size_t first_val = TrainingCount(images.size(), config.train.validation_fraction);
  for (size_t i = first_val == images.size() ? 0 : first_val; i < images.size(); ++i) {
    points.push_back(MeasureImage(result.model, id, config.train.lambda, images[i],
                                  fmt::format("{}@validation{}", name, i)));
  }
  points.push_back(MeanPoint(points, name + "@mean", config.train.lambda));

  EnsureDirectory(config.output);
  SaveWeights(config.output / "weights.easw", result.model, config.train.lambda);
  WriteText(config.output / "train_log.csv", TrainLogCsv(result.log));
  WriteRdCsv(config.output / "rd_summary.csv", points);
  fmt::print(out, "model {} weights {} bpp {} psnr_db {}\n", ModelIdHex(id),
             (config.output / "weights.easw").string(), points.back().bpp,
             points.back().psnr_db);
  return kExitOk;
}

int CmdCompress(const Options& o, std::ostream& out) {
  const LoadedModel loaded = LoadWeights(o.weights.at(0));
  const Image image = ReadImage(o.input);
  const CompressedImage c = CompressImage(loaded.model, loaded.id, image);
  WriteFileAtomic(o.out, c.bytes);
  const double pixels = static_cast<double>(image.width) * image.height;
  fmt::print(out, "bpp {} bytes {} estimated_bpp {}\n", FileBpp(o.out, image.width, image.height),
             c.bytes.size(), c.estimated_bits / pixels);
  return kExitOk;
}

int CmdDecompress(const Options& o, std::ostream& out) {
  const LoadedModel loaded = LoadWeights(o.weights.at(0));
  const Image image = DecompressImage(loaded.model, loaded.id, ReadFileBytes(o.input));
  WriteImage(o.out, image);
  fmt::print(out, "decoded {}x{} to {}\n", image.width, image.height, o.out);
  return kExitOk;
}

int CmdEval(const Options& o, std::ostream& out) {
  const int threads = ThreadLimit();
  std::error_code ec;
  if (!fs::is_directory(o.input, ec)) {
    Fail(ErrorCode::kInvalidArgument, "{} is not a directory", o.input);
  }
  const std::vector<fs::path> files = ListImages(o.input);
  EASN_REQUIRE(!files.empty(), "no images in {}", o.input);
  const LoadedModel loaded = LoadWeights(o.weights.at(0));
  const std::string name(VariantName(loaded.model.config().variant));

  // Streams go through real files so that bpp comes from physical sizes.
  const fs::path scratch = fs::temp_directory_path() /
                           fmt::format("easn-eval-{}-{}", getpid(), ModelIdHex(loaded.id));
  EnsureDirectory(scratch);
  std::vector<RDPoint> points(files.size());
  std::vector<std::string> errors(files.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < files.size(); i = next++) {
      try {
        const Image image = ReadImage(files[i]);
        const fs::path stream = scratch / fmt::format("{}.easn", i);
        CompressFile(loaded.model, loaded.id, files[i], stream);
        const Image decoded = DecompressImage(loaded.model, loaded.id, ReadFileBytes(stream));
        points[i] = {fmt::format("{}@{}", name, files[i].filename().string()), loaded.lambda,
                     FileBpp(stream, image.width, image.height), Psnr(image, decoded)};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(files.size()));
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  fs::remove_all(scratch, ec);
  for (size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) {
      Fail(ErrorCode::kIo, "{}: {}", files[i].string(), errors[i]);
    }
  }
  points.push_back(MeanPoint(points, name + "@mean", loaded.lambda));
  WriteRdCsv(o.out, points);
  for (const RDPoint& p : points) {
    fmt::print(out, "{} bpp {} psnr_db {}\n", p.model, p.bpp, p.psnr_db);
  }
  return kExitOk;
}

int CmdGradcheck(const Options& o, std::ostream& out) {
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  if (o.seed) seeds = {*o.seed};
  std::vector<Variant> layers = AllVariants();
  std::vector<Variant> models = {Variant::kGdn, Variant::kEasnC, Variant::kEasnDeep};
  bool prior = true;
  if (!o.variant.empty()) {
    layers = ParseVariantList(o.variant);
    models.clear();
    for (Variant v : layers) {
      if (v != Variant::kGdnInverse) models.push_back(v);
    }
    prior = false;
  }
  bool ok = true;
  auto report = [&](const SuiteResult& r) {
    for (const GradCheckGroup& g : r.report.groups) {
      fmt::print(out,
                 "{} seed {} {} elements {} skipped {} max_rel_err {:.3e} (at {}: {:.6e} vs "
                 "{:.6e})\n",
                 r.subject, r.seed, g.name, g.elements, g.skipped, g.max_relative_error,
                 g.worst_index, g.worst_analytic, g.worst_numeric);
    }
    fmt::print(out, "{} {} seed {} max_rel_err {:.3e} checked {}/{}\n",
               r.passed() ? "PASS" : "FAIL", r.subject, r.seed, r.report.max_relative_error,
               r.report.elements - r.report.skipped, r.report.elements);
    ok = ok && r.passed();
  };
  for (uint64_t seed : seeds) {
    for (Variant v : layers) report(CheckLayerGradients(v, seed));
    if (prior) report(CheckPriorGradients(seed));
    for (Variant v : models) report(CheckRdLossGradients(v, seed));
  }
  return ok ? kExitOk : kExitRuntime;
}

int CmdAblate(const Options& o, std::ostream& out) {
  Options base = o;
  base.variant.clear();
  RunConfig config = LoadConfigWithOverrides(base);
  std::vector<Variant> variants = config.ablate_variants;
  if (!o.variant.empty()) variants = ParseVariantList(o.variant);
  EASN_REQUIRE(!variants.empty(),
               "no variants to compare: pass --variant A,B or set [ablate] variants");
  for (Variant v : variants) {
    ModelConfig mc = config.model;
    mc.variant = v;
    mc.Validate();
  }
  const std::vector<Image> images = LoadTrainingImages(config);

  std::string csv = "variant,final_train_loss,final_val_loss,param_count,norm_param_count\n";
  std::vector<std::pair<fs::path, std::string>> logs;
  for (Variant v : variants) {
    ModelConfig mc = config.model;
    mc.variant = v;
    const TrainResult r = Train(images, mc, config.train);
    const EpochLog& last = r.log.epochs.back();
    const std::string name(VariantName(v));
    csv += fmt::format("{},{},{},{},{}\n", name, last.train_loss, last.val_loss,
                       r.model.ParamCount(), r.model.NormParamCount());
    fmt::print(out, "{} train_loss {} val_loss {} params {} norm_params {}\n", name,
               last.train_loss, last.val_loss, r.model.ParamCount(), r.model.NormParamCount());
    logs.emplace_back(config.output / fmt::format("ablation_{}_log.csv", name),
                      TrainLogCsv(r.log));
  }
  EnsureDirectory(config.output);
  for (const auto& [path, text] : logs) WriteText(path, text);
  WriteText(config.output / "ablation.csv", csv);
  return kExitOk;
}

int CmdVisualize(const Options& o, std::ostream& out) {
  std::optional<Rect> flat;
  if (!o.config.empty()) flat = LoadRunConfig(o.config).flat_region;
  std::vector<LoadedModel> models;
  for (const std::string& w : o.weights) models.push_back(LoadWeights(w));
  for (const LoadedModel& m : models) {
    const std::vector<std::string> taps = m.model.TapNames();
    if (!o.tap.empty() && std::find(taps.begin(), taps.end(), o.tap) == taps.end()) {
      Fail(ErrorCode::kInvalidArgument, "unknown tap '{}'; valid taps: {}", o.tap,
           fmt::join(taps, ", "));
    }
  }
  const Image image = ReadImage(o.input);
  const std::string stem = fs::path(o.input).stem().string();
  const fs::path dir = o.out;

  struct Output {
    fs::path path;
    HfMap map;
  };
  std::vector<Output> outputs;
  std::string stats = "model_id,variant,lambda,tap,mean_abs_hf,flat_mean_abs_hf\n";
  HfMap gradient = LogGradientMap(image);
  outputs.push_back({dir / (stem + "_loggrad.pgm"), gradient});
  for (const LoadedModel& m : models) {
    const std::string id = ModelIdHex(m.id);
    const std::string variant(VariantName(m.model.config().variant));
    std::vector<std::string> taps = m.model.TapNames();
    if (!o.tap.empty()) taps = {o.tap};
    for (const std::string& tap : taps) {
      HfMap map = HighFreqMap(CaptureScalingFeatures(m.model, image, tap));
      map.source = fmt::format("{} {} tap {}", id, variant, tap);
      // The flat region is given in image pixels; the map may be subsampled.
      const int padded_h =
          (image.height + m.model.config().Granularity() - 1) /
          m.model.config().Granularity() * m.model.config().Granularity();
      const double f = static_cast<double>(map.height) / padded_h;
      Rect region{0, 0, map.height, map.width};
      if (flat) {
        region = {static_cast<int>(flat->top * f), static_cast<int>(flat->left * f),
                  std::max(1, static_cast<int>(flat->height * f)),
                  std::max(1, static_cast<int>(flat->width * f))};
      }
      const double whole = MeanAbsInRegion(map, {0, 0, map.height, map.width});
      const double flat_value = MeanAbsInRegion(map, region);
      stats += fmt::format("{},{},{},{},{},{}\n", id, variant, m.lambda, tap, whole, flat_value);
      fmt::print(out, "model {} variant {} lambda {} tap {} mean_abs_hf {} flat_mean_abs_hf {}\n",
                 id, variant, m.lambda, tap, whole, flat_value);
      outputs.push_back({dir / fmt::format("{}_{}_{}.pgm", stem, id, tap), std::move(map)});
    }
  }
  EnsureDirectory(dir);
  for (const Output& x : outputs) WriteHfPgm(x.path, x.map);
  WriteText(dir / (stem + "_hf_stats.csv"), stats);
  return kExitOk;
}

int CmdSynth(const Options& o, std::ostream& out) {
  const uint64_t seed = o.seed.value_or(1);
  const std::vector<Image> images = SyntheticImages(o.count, o.width, o.height, seed);
  EnsureDirectory(o.out);
  for (size_t i = 0; i < images.size(); ++i) {
    WriteImage(fs::path(o.out) / fmt::format("synth_{:04d}.png", i), images[i]);
  }
  fmt::print(out, "wrote {} images to {}\n", images.size(), o.out);
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned image compression with adaptive scaling normalization"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
  auto add_variant = [&](CLI::App* c, const std::string& help) {
    c->add_option("--variant", o.variant, help);
  };

  CLI::App* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", o.config, "INI config")->required();
  train->add_option("--out", o.out, "Output directory (overrides [paths] output)");
  add_seed(train);
  add_variant(train, "Normalization variant (overrides [model] variant)");

  CLI::App* compress = app.add_subcommand("compress", "Compress an image");
  compress->add_option("--weights", o.weights, "Weights file")->required()->expected(1);
  compress->add_option("--out", o.out, "Bitstream output")->required();
  compress->add_option("image", o.input, "PNG or PPM/PGM image")->required();

  CLI::App* decompress = app.add_subcommand("decompress", "Decode a bitstream");
  decompress->add_option("--weights", o.weights, "Weights file")->required()->expected(1);
  decompress->add_option("--out", o.out, "Image output (.png, .ppm)")->required();
  decompress->add_option("stream", o.input, "Bitstream file")->required();

  CLI::App* eval = app.add_subcommand("eval", "Rate-distortion points for a directory");
  eval->add_option("--weights", o.weights, "Weights file")->required()->expected(1);
  eval->add_option("--out", o.out, "CSV output")->required();
  eval->add_option("dir", o.input, "Image directory")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  add_variant(gradcheck, "Comma separated layers (default: all)");
  add_seed(gradcheck);

  CLI::App* ablate = app.add_subcommand("ablate", "Train several variants with one config");
  ablate->add_option("--config", o.config, "INI config")->required();
  ablate->add_option("--out", o.out, "Output directory (overrides [paths] output)");
  add_variant(ablate, "Comma separated variants (overrides [ablate] variants)");
  add_seed(ablate);

  CLI::App* visualize = app.add_subcommand("visualize", "High-frequency maps of layer taps");
  visualize->add_option("--weights", o.weights, "Weights file(s)")->required();
  visualize->add_option("--out", o.out, "Output directory")->required();
  visualize->add_option("--tap", o.tap, "Tap name (default: every tap)");
  visualize->add_option("--config", o.config, "INI config with [analysis] flat_region");
  visualize->add_option("image", o.input, "Input image")->required();

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic training images");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--count", o.count, "Number of images")->check(CLI::Range(1, 100000));
  synth->add_option("--width", o.width, "Width")->check(CLI::Range(1, 65535));
  synth->add_option("--height", o.height, "Height")->check(CLI::Range(1, 65535));
  add_seed(synth);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) return CmdTrain(o, out);
    if (compress->parsed()) return CmdCompress(o, out);
    if (decompress->parsed()) return CmdDecompress(o, out);
    if (eval->parsed()) return CmdEval(o, out);
    if (gradcheck->parsed()) return CmdGradcheck(o, out);
    if (ablate->parsed()) return CmdAblate(o, out);
    if (visualize->parsed()) return CmdVisualize(o, out);
    if (synth->parsed()) return CmdSynth(o, out);
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace easn
