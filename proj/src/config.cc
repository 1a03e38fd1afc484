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

#include "easn/config.h"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "easn/error.h"

namespace easn {
namespace {

std::string Trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& raw) {
  const std::string s = Trim(raw);
  T value{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (s.empty() || ec != std::errc() || ptr != end) {
    Fail(ErrorCode::kInvalidArgument, "{}: cannot parse '{}' as a number", key, raw);
  }
  return value;
}

Variant ParseVariantValue(const std::string& key, const std::string& raw) {
  const std::optional<Variant> v = ParseVariant(Trim(raw));
  if (!v) {
    std::vector<std::string> names;
    for (Variant x : AllVariants()) names.emplace_back(VariantName(x));
    std::string list;
    for (const std::string& n : names) list += (list.empty() ? "" : ", ") + n;
    Fail(ErrorCode::kInvalidArgument, "{}: unknown variant '{}' (valid: {})", key, raw, list);
  }
  return *v;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string&)>;

template <typename T>
Setter Number(T ModelConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.model.*field = ParseNumber<T>(k, v);
  };
}

template <typename T>
Setter TrainNumber(T TrainConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.train.*field = ParseNumber<T>(k, v);
  };
}

template <typename T>
Setter SyntheticNumber(T SyntheticSource::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    (*c.synthetic).*field = ParseNumber<T>(k, v);
  };
}

const std::map<std::string, std::map<std::string, Setter>>& Schema() {
  static const auto* schema = new std::map<std::string, std::map<std::string, Setter>>{
      {"model",
       {{"stages", Number(&ModelConfig::stages)},
        {"base_channels", Number(&ModelConfig::base_channels)},
        {"latent_channels", Number(&ModelConfig::latent_channels)},
        {"kernel", Number(&ModelConfig::kernel)},
        {"gdn_gamma_init", Number(&ModelConfig::gdn_gamma_init)},
        {"seed", Number(&ModelConfig::seed)},
        {"variant",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.model.variant = ParseVariantValue(k, v);
         }}}},
      {"train",
       {{"lambda", TrainNumber(&TrainConfig::lambda)},
        {"lr_init", TrainNumber(&TrainConfig::lr_init)},
        {"batch", TrainNumber(&TrainConfig::batch)},
        {"crop", TrainNumber(&TrainConfig::crop)},
        {"plateau_patience_epochs", TrainNumber(&TrainConfig::plateau_patience_epochs)},
        {"lr_factor", TrainNumber(&TrainConfig::lr_factor)},
        {"max_lr_drops", TrainNumber(&TrainConfig::max_lr_drops)},
        {"max_steps", TrainNumber(&TrainConfig::max_steps)},
        {"validation_fraction", TrainNumber(&TrainConfig::validation_fraction)},
        {"seed", TrainNumber(&TrainConfig::seed)}}},
      {"paths",
       {{"dataset",
         [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = Trim(v); }},
        {"output",
         [](RunConfig& c, const std::string&, const std::string& v) { c.output = Trim(v); }}}},
      {"synthetic",
       {{"count", SyntheticNumber(&SyntheticSource::count)},
        {"width", SyntheticNumber(&SyntheticSource::width)},
        {"height", SyntheticNumber(&SyntheticSource::height)},
        {"seed", SyntheticNumber(&SyntheticSource::seed)}}},
      {"analysis",
       {{"flat_region",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           // top,left,height,width
           std::vector<int> parts;
           std::stringstream ss(v);
           std::string item;
           while (std::getline(ss, item, ',')) parts.push_back(ParseNumber<int>(k, item));
           EASN_REQUIRE(parts.size() == 4, "{}: expected top,left,height,width", k);
           c.flat_region = Rect{parts[0], parts[1], parts[2], parts[3]};
         }}}},
      {"ablate",
       {{"variants",
         [](RunConfig& c, const std::string&, const std::string& v) {
           c.ablate_variants = ParseVariantList(v);
         }}}},
  };
  return *schema;
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

void RunConfig::SetSeed(uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  EASN_REQUIRE(dataset.empty() != !synthetic.has_value(),
               "exactly one data source is required: [paths] dataset or a [synthetic] "
               "section");
  if (synthetic) {
    EASN_REQUIRE(synthetic->count >= 1 && synthetic->width >= 1 && synthetic->height >= 1,
                 "[synthetic] count, width and height must be >= 1");
  }
  if (flat_region) {
    EASN_REQUIRE(flat_region->top >= 0 && flat_region->left >= 0 &&
                     flat_region->height >= 1 && flat_region->width >= 1,
                 "[analysis] flat_region must have a non-negative origin and positive size");
  }
  EASN_REQUIRE(train.crop % model.Granularity() == 0,
               "train crop {} must be a multiple of {} (2^stages)", train.crop,
               model.Granularity());
}

RunConfig ParseRunConfig(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    Fail(ErrorCode::kInvalidArgument, "config parse error: {}", e.what());
  }
  RunConfig config;
  const auto& schema = Schema();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      Fail(ErrorCode::kInvalidArgument, "config key '{}' outside any section", section);
    }
    const auto s = schema.find(section);
    if (s == schema.end()) {
      Fail(ErrorCode::kInvalidArgument, "unknown config section [{}]", section);
    }
    if (section == "synthetic" && !config.synthetic) config.synthetic = SyntheticSource{};
    for (const auto& [key, value] : keys) {
      const auto setter = s->second.find(key);
      if (setter == s->second.end()) {
        Fail(ErrorCode::kInvalidArgument, "unknown config key '{}' in [{}]", key, section);
      }
      setter->second(config, section + "." + key, value.data());
    }
  }
  config.dataset = Resolve(base_dir, config.dataset);
  config.output = Resolve(base_dir, config.output);
  config.Validate();
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    Fail(ErrorCode::kInvalidArgument, "config file {} does not exist", path.string());
  }
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  std::filesystem::path base = path.parent_path();
  if (base.empty()) base = ".";
  return ParseRunConfig(std::string(bytes.begin(), bytes.end()), base);
}

std::vector<Image> LoadTrainingImages(const RunConfig& config) {
  if (config.synthetic) {
    const SyntheticSource& s = *config.synthetic;
    return SyntheticImages(s.count, s.width, s.height, s.seed);
  }
  std::error_code ec;
  if (!std::filesystem::is_directory(config.dataset, ec)) {
    Fail(ErrorCode::kInvalidArgument, "dataset directory {} does not exist",
         config.dataset.string());
  }
  const std::vector<std::filesystem::path> files = ListImages(config.dataset);
  EASN_REQUIRE(!files.empty(), "dataset directory {} has no images", config.dataset.string());
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(ReadImage(f));
  return images;
}

std::vector<Variant> ParseVariantList(const std::string& text) {
  std::vector<Variant> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (Trim(item).empty()) continue;
    out.push_back(ParseVariantValue("variant", item));
  }
  EASN_REQUIRE(!out.empty(), "empty variant list");
  return out;
}

}  // namespace easn
