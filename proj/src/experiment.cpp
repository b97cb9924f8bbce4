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

#include "spyglass/experiment.hpp"

#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "spyglass/checkpoint.hpp"

namespace spyglass {

std::vector<AblationSetting> embedding_study() {
  return {{"Fourier embeds (bs.)", "spectral", PathwayMask::spectral_only, "none"},
          {"Img embeds", "image", PathwayMask::image_only, "none"},
          {"Img embeds + Augs.", "image_augs", PathwayMask::image_only, "combined"},
          {"Joint", "joint", PathwayMask::joint, "combined"}};
}

std::vector<AblationSetting> augmentation_study() {
  std::vector<AblationSetting> out;
  for (std::string_view name : kPolicyNames) {
    out.push_back({std::string(name), "aug_" + std::string(name), PathwayMask::joint, std::string(name)});
  }
  return out;
}

const AblationRow* AblationResult::find(const std::string& label) const {
  for (const AblationRow& row : rows) {
    if (row.setting.label == label) return &row;
  }
  return nullptr;
}

namespace {

double test_silhouette(DetectorModel<float>& model, std::span<const LabeledImage> in_domain_test) {
  std::vector<int> labels;
  for (const LabeledImage& s : in_domain_test) labels.push_back(s.label);
  const ForwardResult<float> out = infer(model, in_domain_test);
  return separation_score(to_matrix(out.embeddings), labels).silhouette;
}

}  // namespace

AblationResult run_ablation(const RunConfig& base, std::span<const ImageRecord> records,
                            std::span<const AblationSetting> settings, const std::filesystem::path& out_dir,
                            std::ostream* log) {
  const std::vector<LabeledImage> train_set = load_records(filter_split(records, Split::train));
  const std::vector<LabeledImage> val_set = load_records(filter_split(records, Split::val));
  const std::vector<LabeledImage> test_set = load_records(filter_split(records, Split::test));
  std::vector<LabeledImage> in_domain_test;
  for (const LabeledImage& s : test_set) {
    if (!is_ood_domain(s.domain)) in_domain_test.push_back(s);
  }
  if (in_domain_test.empty()) throw ConfigError("ablation needs in-domain test records");

  AblationResult result;
  {
    RunConfig joint = base;
    joint.model.pathway = PathwayMask::joint;
    DetectorModel<float> untrained(joint.model, joint.train.seed);
    result.untrained_silhouette = test_silhouette(untrained, in_domain_test);
  }

  for (const AblationSetting& setting : settings) {
    RunConfig config = base;
    config.model.pathway = setting.pathway;
    config.augmentation = setting.augmentation;
    config.finalize();
    if (log) *log << "== " << setting.label << '\n';
    config.train.log = log;

    DetectorModel<float> model(config.model, config.train.seed);
    const TrainResult trained = train(model, train_set, val_set, config.train);
    AblationRow row{setting, evaluate(model, test_set, config.threshold), test_silhouette(model, in_domain_test),
                    trained.history};
    if (!out_dir.empty()) {
      const std::filesystem::path dir = out_dir / setting.slug;
      std::filesystem::create_directories(dir);
      config.checkpoint = (dir / "checkpoint.bin").string();
      config.out_dir = dir.string();
      save_checkpoint(dir / "checkpoint.bin", model, &trained.best_state);
      write_history_csv(dir / "history.csv", trained.history);
      write_run_config(dir / "resolved_config.txt", config);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::vector<std::string> ood_domains(const AblationResult& result) {
  std::set<std::string> tags;
  for (const AblationRow& row : result.rows) {
    for (const DomainReport& d : row.report.domains) {
      if (d.out_of_domain) tags.insert(d.domain);
    }
  }
  return {tags.begin(), tags.end()};
}

}  // namespace

void print_ablation_table(std::ostream& out, const AblationResult& result) {
  const std::vector<std::string> ood = ood_domains(result);
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << std::left << std::setw(24) << "config" << std::right << std::setw(11)
    << "in-domain";
  for (const std::string& tag : ood) s << std::setw(std::max<int>(11, static_cast<int>(tag.size()) + 2)) << tag;
  if (!ood.empty()) s << std::setw(12) << "OOD avg";
  s << std::setw(10) << "average" << std::setw(8) << "F1" << std::setw(12) << "silhouette" << '\n';
  for (const AblationRow& row : result.rows) {
    const EvalReport& r = row.report;
    s << std::left << std::setw(24) << row.setting.label << std::right << std::setw(11) << r.in_domain_accuracy;
    for (const std::string& tag : ood) {
      const DomainReport* d = r.find(tag);
      s << std::setw(std::max<int>(11, static_cast<int>(tag.size()) + 2));
      if (d) {
        s << d->metrics.accuracy;
      } else {
        s << "-";
      }
    }
    if (!ood.empty()) s << std::setw(12) << r.ood_average_accuracy;
    double f1 = 0;
    for (const DomainReport& d : r.domains) {
      if (!d.out_of_domain) f1 = d.metrics.f1;
    }
    s << std::setw(10) << r.overall_average << std::setw(8) << f1 << std::setw(12) << row.silhouette << '\n';
  }
  s << "untrained joint silhouette " << result.untrained_silhouette << '\n';
  out << s.str();
}

std::string ablation_json(const AblationResult& result) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const AblationRow& row : result.rows) {
    nlohmann::ordered_json r;
    r["label"] = row.setting.label;
    r["pathway"] = pathway_name(row.setting.pathway);
    r["augmentation"] = row.setting.augmentation;
    r["best_epoch"] = row.history.best_epoch;
    r["stopped_epoch"] = row.history.stopped_epoch;
    r["silhouette"] = row.silhouette;
    r["report"] = nlohmann::ordered_json::parse(report_json(row.report));
    rows.push_back(std::move(r));
  }
  nlohmann::ordered_json j;
  j["rows"] = rows;
  j["untrained_silhouette"] = result.untrained_silhouette;
  return j.dump(2) + "\n";
}

}  // namespace spyglass
