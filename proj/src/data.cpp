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

#include "spyglass/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "spyglass/error.hpp"
#include "spyglass/rng.hpp"

namespace spyglass {

namespace fs = std::filesystem;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::vector<ImageRecord> split_dataset(std::vector<ImageRecord> records, const SplitRatios& ratios,
                                       std::uint64_t seed, std::ostream* warnings) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  std::map<std::tuple<int, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) strata[{records[i].label, records[i].domain}].push_back(i);

  for (auto& [key, members] : strata) {
    const auto& [label, domain] = key;
    const std::size_t n = members.size();
    if (n < 3) {
      if (warnings) {
        *warnings << "warning: stratum (label=" << label << ", domain=" << domain << ") has " << n
                  << " record(s); assigning all to train\n";
      }
      for (std::size_t i : members) records[i].split = Split::train;
      continue;
    }
    Rng rng = derive_stream(seed, {stable_hash("split"), static_cast<std::uint64_t>(label), stable_hash(domain)});
    std::shuffle(members.begin(), members.end(), rng);
    // Scale to integers first so 0.1 * 100 floors to 10, not 9.
    const auto take = [n](double ratio) {
      return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_val = take(ratios.val);
    const std::size_t n_test = take(ratios.test);
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t j = 0; j < n; ++j) {
      records[members[j]].split = j < n_train ? Split::train : (j < n_train + n_val ? Split::val : Split::test);
    }
  }
  return records;
}

std::vector<ImageRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  std::vector<ImageRecord> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_number) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw FormatError(where + "expected a JSON object");
    for (const auto& item : obj.items()) {
      const std::string& key = item.key();
      if (key != "path" && key != "label" && key != "domain" && key != "split") {
        throw FormatError(where + "unknown key '" + key + "'");
      }
    }
    for (const char* key : {"path", "label", "domain", "split"}) {
      if (!obj.contains(key)) throw FormatError(where + "missing key '" + key + "'");
    }
    ImageRecord r;
    if (!obj["path"].is_string()) throw FormatError(where + "path must be a string");
    if (!obj["domain"].is_string()) throw FormatError(where + "domain must be a string");
    if (!obj["split"].is_string()) throw FormatError(where + "split must be a string");
    if (!obj["label"].is_number_integer() || (obj["label"] != 0 && obj["label"] != 1)) {
      throw FormatError(where + "label must be 0 or 1, got " + obj["label"].dump());
    }
    r.path = obj["path"].get<std::string>();
    if (r.path.is_relative()) r.path = base / r.path;
    r.label = obj["label"].get<int>();
    r.domain = obj["domain"].get<std::string>();
    try {
      r.split = split_from_name(obj["split"].get<std::string>());
    } catch (const ConfigError& e) {
      throw FormatError(where + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& path, std::span<const ImageRecord> records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest '" + path.string() + "'");
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  for (const ImageRecord& r : records) {
    fs::path stored = r.path;
    const fs::path rel = fs::absolute(r.path).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") stored = rel;
    nlohmann::json obj{{"path", stored.generic_string()},
                       {"label", r.label},
                       {"domain", r.domain},
                       {"split", std::string(split_name(r.split))}};
    out << obj.dump() << '\n';
  }
  if (!out) throw FormatError("failed writing manifest '" + path.string() + "'");
}

std::vector<ImageRecord> filter_split(std::span<const ImageRecord> records, Split split) {
  std::vector<ImageRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const ImageRecord& r) { return r.split == split; });
  return out;
}

LabeledImage load_record(const ImageRecord& record) {
  return {read_image(record.path), record.label, record.domain, record.path.string()};
}

std::vector<LabeledImage> load_records(std::span<const ImageRecord> records) {
  std::vector<LabeledImage> out;
  out.reserve(records.size());
  for (const ImageRecord& r : records) out.push_back(load_record(r));
  return out;
}

}  // namespace spyglass
