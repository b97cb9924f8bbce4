/*
 * Copyright 2026 The Spyglass Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spyglass/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>

namespace spyglass {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(text) + "' for key '" + std::string(key) + "'");
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename Range, typename Fn>
std::string join(const Range& items, Fn fn) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += fn(item);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(std::string key, Access access) {
  return {key,
          [key, access](RunConfig& c, std::string_view v) { access(c) = parse_number<T>(key, v); },
          [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(access(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          }};
}

template <typename Access>
Field string_field(std::string key, Access access) {
  return {key, [access](RunConfig& c, std::string_view v) { access(c) = std::string(v); },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); }};
}

// Encoder hyperparameters are shared by both pathways.
template <typename Fn>
void for_encoders(RunConfig& c, Fn fn) {
  fn(c.model.image_encoder);
  fn(c.model.spectral_encoder);
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // Training.
    f.push_back(number<std::uint64_t>("seed", [](RunConfig& c) -> auto& { return c.train.seed; }));
    f.push_back(number<Index>("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    f.push_back(number<double>("learning_rate", [](RunConfig& c) -> auto& { return c.train.adam.learning_rate; }));
    f.push_back(number<int>("max_epochs", [](RunConfig& c) -> auto& { return c.train.max_epochs; }));
    f.push_back(number<int>("early_stop_patience", [](RunConfig& c) -> auto& { return c.train.early_stop_patience; }));
    f.push_back(number<double>("adam_beta1", [](RunConfig& c) -> auto& { return c.train.adam.beta1; }));
    f.push_back(number<double>("adam_beta2", [](RunConfig& c) -> auto& { return c.train.adam.beta2; }));
    f.push_back(number<double>("adam_eps", [](RunConfig& c) -> auto& { return c.train.adam.eps; }));
    f.push_back({"augmentation",
                 [](RunConfig& c, std::string_view v) {
                   policy_from_name(v);
                   c.augmentation = std::string(v);
                 },
                 [](const RunConfig& c) { return c.augmentation; }});
    f.push_back(number<double>("threshold", [](RunConfig& c) -> auto& { return c.threshold; }));
    // Model.
    f.push_back({"pathway", [](RunConfig& c, std::string_view v) { c.model.pathway = pathway_from_name(v); },
                 [](const RunConfig& c) { return std::string(pathway_name(c.model.pathway)); }});
    f.push_back({"fusion", [](RunConfig& c, std::string_view v) { c.model.fusion = fusion_from_name(v); },
                 [](const RunConfig& c) { return std::string(fusion_name(c.model.fusion)); }});
    f.push_back(number<Index>("input_side", [](RunConfig& c) -> auto& { return c.model.input_side; }));
    f.push_back({"stage_widths",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<Index> widths;
                   for (std::string_view item : split_list(v)) widths.push_back(parse_number<Index>("stage_widths", item));
                   for_encoders(c, [&](EncoderConfig& e) { e.stage_widths = widths; });
                 },
                 [](const RunConfig& c) {
                   return join(c.model.image_encoder.stage_widths, [](Index w) { return std::to_string(w); });
                 }});
    f.push_back({"kernel_size",
                 [](RunConfig& c, std::string_view v) {
                   const Index k = parse_number<Index>("kernel_size", v);
                   for_encoders(c, [&](EncoderConfig& e) { e.kernel_size = k; });
                 },
                 [](const RunConfig& c) { return std::to_string(c.model.image_encoder.kernel_size); }});
    f.push_back({"residual_skips",
                 [](RunConfig& c, std::string_view v) {
                   const bool on = parse_bool("residual_skips", v);
                   for_encoders(c, [&](EncoderConfig& e) { e.residual_skips = on; });
                 },
                 [](const RunConfig& c) { return std::string(c.model.image_encoder.residual_skips ? "true" : "false"); }});
    f.push_back({"embed_dim",
                 [](RunConfig& c, std::string_view v) {
                   const Index d = parse_number<Index>("embed_dim", v);
                   for_encoders(c, [&](EncoderConfig& e) { e.embed_dim = d; });
                 },
                 [](const RunConfig& c) { return std::to_string(c.model.image_encoder.embed_dim); }});
    f.push_back({"train_encoders",
                 [](RunConfig& c, std::string_view v) { c.model.train_encoders = parse_bool("train_encoders", v); },
                 [](const RunConfig& c) { return std::string(c.model.train_encoders ? "true" : "false"); }});
    // Generator.
    f.push_back(number<Index>("count_per_class", [](RunConfig& c) -> auto& { return c.generator.count_per_class; }));
    f.push_back(number<Index>("image_side", [](RunConfig& c) -> auto& { return c.generator.side; }));
    f.push_back(number<double>("alpha_min", [](RunConfig& c) -> auto& { return c.generator.alpha_min; }));
    f.push_back(number<double>("alpha_max", [](RunConfig& c) -> auto& { return c.generator.alpha_max; }));
    f.push_back(number<Index>("blob_count_min", [](RunConfig& c) -> auto& { return c.generator.blob_count_min; }));
    f.push_back(number<Index>("blob_count_max", [](RunConfig& c) -> auto& { return c.generator.blob_count_max; }));
    f.push_back({"artifact_family",
                 [](RunConfig& c, std::string_view v) { c.generator.artifact_family = family_from_name(v); },
                 [](const RunConfig& c) { return std::string(family_name(c.generator.artifact_family)); }});
    f.push_back(number<double>("artifact_amplitude_min",
                               [](RunConfig& c) -> auto& { return c.generator.artifact_amplitude_min; }));
    f.push_back(number<double>("artifact_amplitude_max",
                               [](RunConfig& c) -> auto& { return c.generator.artifact_amplitude_max; }));
    f.push_back(number<std::uint64_t>("data_seed", [](RunConfig& c) -> auto& { return c.generator.seed; }));
    f.push_back({"ood_families",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<ArtifactFamily> families;
                   for (std::string_view item : split_list(v)) {
                     if (item != "none") families.push_back(family_from_name(item));
                   }
                   c.generator.ood_families = families;
                 },
                 [](const RunConfig& c) {
                   if (c.generator.ood_families.empty()) return std::string("none");
                   return join(c.generator.ood_families, [](ArtifactFamily a) { return std::string(family_name(a)); });
                 }});
    f.push_back(number<Index>("ood_count_per_class",
                              [](RunConfig& c) -> auto& { return c.generator.ood_count_per_class; }));
    f.push_back(number<double>("split_train", [](RunConfig& c) -> auto& { return c.generator.split.train; }));
    f.push_back(number<double>("split_val", [](RunConfig& c) -> auto& { return c.generator.split.val; }));
    f.push_back(number<double>("split_test", [](RunConfig& c) -> auto& { return c.generator.split.test; }));
    // Paths.
    f.push_back(string_field("manifest", [](RunConfig& c) -> auto& { return c.manifest; }));
    f.push_back(string_field("checkpoint", [](RunConfig& c) -> auto& { return c.checkpoint; }));
    f.push_back(string_field("out_dir", [](RunConfig& c) -> auto& { return c.out_dir; }));
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::finalize() {
  train.augmentation = policy_from_name(augmentation);
  if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("threshold must lie in [0,1]");
  generator.validate();
  model.validate();
  train.validate();
}

std::string_view pathway_name(PathwayMask mask) {
  switch (mask) {
    case PathwayMask::image_only: return "image";
    case PathwayMask::spectral_only: return "spectral";
    case PathwayMask::joint: return "joint";
  }
  return "joint";
}

PathwayMask pathway_from_name(std::string_view name) {
  if (name == "image" || name == "image_only") return PathwayMask::image_only;
  if (name == "spectral" || name == "spectral_only") return PathwayMask::spectral_only;
  if (name == "joint") return PathwayMask::joint;
  throw ConfigError("unknown pathway '" + std::string(name) + "' (expected image, spectral or joint)");
}

std::string_view fusion_name(FusionMode mode) { return mode == FusionMode::add ? "add" : "concat"; }

FusionMode fusion_from_name(std::string_view name) {
  if (name == "add") return FusionMode::add;
  if (name == "concat") return FusionMode::concat;
  throw ConfigError("unknown fusion '" + std::string(name) + "' (expected add or concat)");
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_assignment(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void load_run_config(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    std::string_view text = line;
    text = trim(text.substr(0, text.find('#')));
    if (text.empty()) continue;
    try {
      apply_assignment(config, text);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << format_run_config(config);
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace spyglass
