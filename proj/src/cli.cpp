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

#include "spyglass/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "spyglass/checkpoint.hpp"
#include "spyglass/config.hpp"
#include "spyglass/experiment.hpp"
#include "spyglass/generator.hpp"

namespace spyglass {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPrecedence =
    "Settings resolve in increasing precedence: built-in defaults, the --config file "
    "(`key = value` lines, `#` comments), --set key=value overrides in order, then dedicated flags.";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common, bool config_required) {
  auto* opt = cmd->add_option("--config", common.config_path, "key = value config file");
  if (config_required) opt->required();
  cmd->add_option("--set", common.overrides, "override one config key (key=value); repeatable");
}

RunConfig resolve(const Common& common, const std::optional<fs::path>& base_config = std::nullopt) {
  RunConfig config;
  if (base_config && fs::exists(*base_config)) load_run_config(*base_config, config);
  if (!common.config_path.empty()) load_run_config(common.config_path, config);
  for (const std::string& s : common.overrides) apply_assignment(config, s);
  return config;
}

std::vector<LabeledImage> load_split(const fs::path& manifest, const std::string& split) {
  const std::vector<ImageRecord> records = load_manifest(manifest);
  if (split == "all") return load_records(records);
  return load_records(filter_split(records, split_from_name(split)));
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  return file.parent_path() / (file.stem().string() + suffix);
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw FormatError(what + " '" + path.string() + "' does not exist");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral and image fake-image detector: data generation, training and evaluation.", "spyglass"};
  app.footer(kPrecedence);
  app.require_subcommand(1);

  Common gen_common, train_common, eval_common, embed_common, ablate_common;
  std::string gen_out, train_manifest, train_out, eval_manifest, eval_checkpoint, eval_json, eval_split = "test";
  std::string spectrum_image, spectrum_out, embed_manifest, embed_checkpoint, embed_out, embed_split = "test";
  std::string ablate_manifest, ablate_out, study = "embedding";
  std::optional<double> threshold;
  Index spectrum_side = 0;

  auto* gen = app.add_subcommand("generate", "Write a synthetic real/fake dataset and its manifest.");
  add_common(gen, gen_common, false);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->footer(kPrecedence);

  auto* tr = app.add_subcommand("train", "Train a detector; writes checkpoint.bin, history.csv, resolved_config.txt.");
  add_common(tr, train_common, false);
  tr->add_option("--manifest", train_manifest, "dataset manifest (JSON lines)");
  tr->add_option("--out", train_out, "output directory");
  tr->footer(kPrecedence);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; prints a per-domain table and writes a JSON report.");
  add_common(ev, eval_common, false);
  ev->add_option("--manifest", eval_manifest, "dataset manifest");
  ev->add_option("--checkpoint", eval_checkpoint, "checkpoint file");
  ev->add_option("--threshold", threshold, "probability at or above which an image is called real");
  ev->add_option("--split", eval_split, "split to score: train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  ev->add_option("--json", eval_json, "report path (default: eval_report.json beside the checkpoint)");
  ev->footer(std::string(kPrecedence) +
             " The model configuration starts from resolved_config.txt beside the checkpoint when present.");

  auto* sp = app.add_subcommand("spectrum", "Write the normalised log-magnitude spectrum of an image.");
  sp->add_option("--image", spectrum_image, "input PNG/PPM/PGM")->required();
  sp->add_option("--out", spectrum_out, "output .png or .pgm")->required();
  sp->add_option("--side", spectrum_side, "resize to side x side first (default: keep size)");

  auto* em = app.add_subcommand("embed", "Export joint embeddings as CSV and print their silhouette.");
  add_common(em, embed_common, false);
  em->add_option("--manifest", embed_manifest, "dataset manifest");
  em->add_option("--checkpoint", embed_checkpoint, "checkpoint file");
  em->add_option("--out", embed_out, "CSV path")->required();
  em->add_option("--split", embed_split, "split to export: train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  em->footer(kPrecedence);

  auto* ab = app.add_subcommand("ablate", "Train and compare the pathway configurations on one dataset and seed.");
  add_common(ab, ablate_common, false);
  ab->add_option("--manifest", ablate_manifest, "dataset manifest");
  ab->add_option("--out", ablate_out, "output directory");
  ab->add_option("--study", study, "embedding (4 pathway rows) or augmentation (7 policies, joint model)")
      ->check(CLI::IsMember({"embedding", "augmentation"}));
  ab->footer(kPrecedence);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    return kExitUsage;
  }

  try {
    if (*gen) {
      RunConfig config = resolve(gen_common);
      config.out_dir = gen_out;
      config.finalize();
      const std::vector<ImageRecord> records = generate_synthetic(config.generator, gen_out);
      config.manifest = (fs::path(gen_out) / "manifest.jsonl").string();
      write_run_config(fs::path(gen_out) / "resolved_config.txt", config);
      out << "wrote " << records.size() << " images and " << config.manifest << '\n';
    } else if (*tr) {
      RunConfig config = resolve(train_common);
      if (!train_manifest.empty()) config.manifest = train_manifest;
      if (!train_out.empty()) config.out_dir = train_out;
      if (config.manifest.empty()) throw ConfigError("train needs --manifest");
      if (config.out_dir.empty()) throw ConfigError("train needs --out");
      config.finalize();
      const fs::path dir = config.out_dir;
      config.checkpoint = (dir / "checkpoint.bin").string();
      const std::vector<ImageRecord> records = load_manifest(config.manifest);
      const std::vector<LabeledImage> train_set = load_records(filter_split(records, Split::train));
      const std::vector<LabeledImage> val_set = load_records(filter_split(records, Split::val));
      fs::create_directories(dir);
      write_run_config(dir / "resolved_config.txt", config);
      config.train.log = &out;
      DetectorModel<float> model(config.model, config.train.seed);
      const TrainResult result = train(model, train_set, val_set, config.train);
      save_checkpoint(config.checkpoint, model, &result.best_state);
      write_history_csv(dir / "history.csv", result.history);
      out << "best epoch " << result.history.best_epoch << " of " << result.history.stopped_epoch << "; wrote "
          << config.checkpoint << '\n';
    } else if (*ev) {
      RunConfig config = resolve(eval_common, eval_checkpoint.empty()
                                                  ? std::nullopt
                                                  : std::optional(fs::path(eval_checkpoint).parent_path() /
                                                                  "resolved_config.txt"));
      if (!eval_manifest.empty()) config.manifest = eval_manifest;
      if (!eval_checkpoint.empty()) config.checkpoint = eval_checkpoint;
      if (threshold) config.threshold = *threshold;
      if (config.manifest.empty()) throw ConfigError("eval needs --manifest");
      if (config.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
      config.finalize();
      require_file(config.checkpoint, "checkpoint");
      DetectorModel<float> model(config.model, config.train.seed);
      load_checkpoint(config.checkpoint, model);
      const std::vector<LabeledImage> samples = load_split(config.manifest, eval_split);
      const EvalReport report = evaluate(model, samples, config.threshold);
      print_report(out, report);
      const fs::path json =
          eval_json.empty() ? fs::path(config.checkpoint).parent_path() / "eval_report.json" : fs::path(eval_json);
      std::ofstream(json) << report_json(report);
      write_run_config(sibling(json, ".config.txt"), config);
      out << "wrote " << json.string() << '\n';
    } else if (*sp) {
      Image image = read_image(spectrum_image);
      if (spectrum_side > 0) image = resize_bilinear(image, spectrum_side, spectrum_side);
      const Spectrum<float> spectrum = magnitude_spectrum(fft2(to_grayscale(image)), true, true);
      const fs::path target = spectrum_out;
      if (target.extension() == ".pgm") {
        write_pgm(target, spectrum.values);
      } else {
        write_png(target, spectrum.values);
      }
      out << "wrote " << target.string() << '\n';
    } else if (*em) {
      RunConfig config = resolve(embed_common, embed_checkpoint.empty()
                                                   ? std::nullopt
                                                   : std::optional(fs::path(embed_checkpoint).parent_path() /
                                                                   "resolved_config.txt"));
      if (!embed_manifest.empty()) config.manifest = embed_manifest;
      if (!embed_checkpoint.empty()) config.checkpoint = embed_checkpoint;
      if (config.manifest.empty()) throw ConfigError("embed needs --manifest");
      if (config.checkpoint.empty()) throw ConfigError("embed needs --checkpoint");
      config.finalize();
      require_file(config.checkpoint, "checkpoint");
      DetectorModel<float> model(config.model, config.train.seed);
      load_checkpoint(config.checkpoint, model);
      const std::vector<LabeledImage> samples = load_split(config.manifest, embed_split);
      const ForwardResult<float> result = infer(model, samples);
      export_embeddings(embed_out, samples, result.embeddings);
      write_run_config(sibling(embed_out, ".config.txt"), config);
      std::vector<int> labels;
      for (const LabeledImage& s : samples) labels.push_back(s.label);
      const Separation sep = separation_score(to_matrix(result.embeddings), labels);
      out << "wrote " << samples.size() << " embeddings to " << embed_out << "\nsilhouette " << sep.silhouette << '\n';
    } else if (*ab) {
      RunConfig config = resolve(ablate_common);
      if (!ablate_manifest.empty()) config.manifest = ablate_manifest;
      if (!ablate_out.empty()) config.out_dir = ablate_out;
      if (config.manifest.empty()) throw ConfigError("ablate needs --manifest");
      if (config.out_dir.empty()) throw ConfigError("ablate needs --out");
      config.finalize();
      const fs::path dir = config.out_dir;
      fs::create_directories(dir);
      write_run_config(dir / "resolved_config.txt", config);
      const std::vector<AblationSetting> settings = study == "embedding" ? embedding_study() : augmentation_study();
      const AblationResult result = run_ablation(config, load_manifest(config.manifest), settings, dir, &out);
      print_ablation_table(out, result);
      std::ofstream(dir / "ablation.json") << ablation_json(result);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace spyglass
