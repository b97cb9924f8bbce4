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

#include "spyglass/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "spyglass/error.hpp"
#include "spyglass/spectral.hpp"

namespace spyglass {

namespace fs = std::filesystem;

std::string_view family_name(ArtifactFamily family) {
  switch (family) {
    case ArtifactFamily::checkerboard: return "checkerboard";
    case ArtifactFamily::spectral_notch: return "spectral_notch";
    case ArtifactFamily::resample_grid: return "resample_grid";
  }
  return "checkerboard";
}

ArtifactFamily family_from_name(std::string_view name) {
  if (name == "checkerboard" || name == "A") return ArtifactFamily::checkerboard;
  if (name == "spectral_notch" || name == "B") return ArtifactFamily::spectral_notch;
  if (name == "resample_grid" || name == "C") return ArtifactFamily::resample_grid;
  throw ConfigError("unknown artifact family '" + std::string(name) +
                    "' (expected checkerboard, spectral_notch or resample_grid)");
}

char family_letter(ArtifactFamily family) { return static_cast<char>('A' + static_cast<int>(family)); }

std::string in_domain_tag(ArtifactFamily family) { return std::string("astro_synth_") + family_letter(family); }

std::string ood_domain_tag(ArtifactFamily family) { return std::string("ood_") + family_letter(family); }

void GeneratorConfig::validate() const {
  if (count_per_class < 1) throw ConfigError("count_per_class must be at least 1");
  if (!is_power_of_two(side) || side < 4) throw ConfigError("generator side must be a power of two >= 4");
  if (!(alpha_min <= alpha_max)) throw ConfigError("alpha range must be ordered");
  if (blob_count_min < 0 || blob_count_min > blob_count_max) throw ConfigError("blob count range must be ordered");
  if (!(artifact_amplitude_min >= 0 && artifact_amplitude_min <= artifact_amplitude_max)) {
    throw ConfigError("artifact amplitude range must be non-negative and ordered");
  }
  if (!ood_families.empty() && ood_count_per_class < 1) {
    throw ConfigError("ood_count_per_class must be at least 1 when ood families are requested");
  }
  for (std::size_t i = 0; i < ood_families.size(); ++i) {
    if (ood_families[i] == artifact_family) {
      throw ConfigError("ood family '" + std::string(family_name(artifact_family)) + "' is the training family");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (ood_families[j] == ood_families[i]) {
        throw ConfigError("ood family '" + std::string(family_name(ood_families[i])) + "' listed twice");
      }
    }
  }
}

Plane<double> gaussian_random_field(Index side, double alpha, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexPlane<double> noise(side, side);
  for (Index i = 0; i < noise.size(); ++i) noise(i / side, i % side) = normal(rng);
  ComplexPlane<double> freq = fft2(noise);
  for (Index u = 0; u < side; ++u) {
    const double fu = static_cast<double>(u <= side / 2 ? u : u - side) / static_cast<double>(side);
    for (Index v = 0; v < side; ++v) {
      const double fv = static_cast<double>(v <= side / 2 ? v : v - side) / static_cast<double>(side);
      const double f = std::hypot(fu, fv);
      freq(u, v) *= f > 0 ? std::pow(f, -alpha / 2.0) : 0.0;
    }
  }
  Plane<double> field = ifft2(freq).real();
  field -= field.mean();
  const double stddev = std::sqrt(field.square().mean());
  if (stddev > 0) field /= stddev;
  return field;
}

namespace {

Plane<double> normalize_unit(const Plane<double>& p) {
  const double lo = p.minCoeff(), hi = p.maxCoeff();
  if (hi <= lo) return Plane<double>::Zero(p.rows(), p.cols());
  return (p - lo) / (hi - lo);
}

void add_blobs(Plane<double>& field, Index count, Rng& rng) {
  const Index side = field.rows();
  for (Index b = 0; b < count; ++b) {
    const double cy = uniform(rng, 0.0, static_cast<double>(side));
    const double cx = uniform(rng, 0.0, static_cast<double>(side));
    const double sigma = uniform(rng, static_cast<double>(side) / 32.0, static_cast<double>(side) / 8.0);
    const double amplitude = uniform(rng, 1.0, 3.0);
    for (Index y = 0; y < side; ++y) {
      for (Index x = 0; x < side; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        field(y, x) += amplitude * std::exp(-0.5 * d2 / (sigma * sigma));
      }
    }
  }
}

}  // namespace

Plane<double> imprint_artifact(const Plane<double>& base, ArtifactFamily family, const GeneratorConfig& config,
                               Rng& rng) {
  const Index h = base.rows(), w = base.cols();
  Plane<double> out = base;
  switch (family) {
    case ArtifactFamily::checkerboard: {
      const double amplitude = uniform(rng, config.artifact_amplitude_min, config.artifact_amplitude_max);
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) out(y, x) += ((y + x) % 2 == 0 ? amplitude : -amplitude);
      }
      break;
    }
    case ArtifactFamily::spectral_notch: {
      // Annulus in cycles/pixel, placed in the upper band where real spectra are smooth.
      const double radius = uniform(rng, 0.40, 0.47);
      const double width = uniform(rng, 0.06, 0.10);
      ComplexPlane<double> freq = fft2(out);
      for (Index u = 0; u < h; ++u) {
        const double fu = static_cast<double>(u <= h / 2 ? u : u - h) / static_cast<double>(h);
        for (Index v = 0; v < w; ++v) {
          const double fv = static_cast<double>(v <= w / 2 ? v : v - w) / static_cast<double>(w);
          if (std::abs(std::hypot(fu, fv) - radius) <= 0.5 * width) freq(u, v) = 0.0;
        }
      }
      out = ifft2(freq).real();
      break;
    }
    case ArtifactFamily::resample_grid: {
      // 2x2 box downsample, then nearest-neighbour upsample.
      for (Index y = 0; y + 1 < h; y += 2) {
        for (Index x = 0; x + 1 < w; x += 2) {
          const double m = 0.25 * (base(y, x) + base(y + 1, x) + base(y, x + 1) + base(y + 1, x + 1));
          out(y, x) = out(y + 1, x) = out(y, x + 1) = out(y + 1, x + 1) = m;
        }
      }
      break;
    }
  }
  return out.max(0.0).min(1.0);
}

SyntheticSample synthesize(const GeneratorConfig& config, ArtifactFamily family, std::string_view domain, int label,
                           Index index) {
  Rng rng = derive_stream(config.seed, {stable_hash("synthesize"), stable_hash(domain),
                                        static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(index)});
  const double alpha = uniform(rng, config.alpha_min, config.alpha_max);
  Plane<double> field = gaussian_random_field(config.side, alpha, rng);
  const Index blobs =
      std::uniform_int_distribution<Index>(config.blob_count_min, config.blob_count_max)(rng);
  add_blobs(field, blobs, rng);

  SyntheticSample sample;
  sample.base = normalize_unit(field);
  std::array<double, 3> tint{};
  for (double& t : tint) t = uniform(rng, 0.75, 1.0);
  sample.luminance = label == kFakeLabel ? imprint_artifact(sample.base, family, config, rng) : sample.base;
  sample.image = Image(config.side, config.side);
  for (int c = 0; c < 3; ++c) sample.image.channels[c] = (sample.luminance * tint[c]).cast<float>();
  return sample;
}

std::vector<ImageRecord> generate_synthetic(const GeneratorConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw FormatError("cannot create '" + out_dir.string() + "': " + ec.message());

  const auto write_domain = [&](ArtifactFamily family, const std::string& domain, Index count) {
    fs::create_directories(out_dir / domain, ec);
    if (ec) throw FormatError("cannot create '" + (out_dir / domain).string() + "': " + ec.message());
    std::vector<ImageRecord> records;
    for (int label : {kRealLabel, kFakeLabel}) {
      for (Index i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%05ld.png", label == kRealLabel ? "real" : "fake", static_cast<long>(i));
        const fs::path path = out_dir / domain / name;
        write_png(path, synthesize(config, family, domain, label, i).image);
        records.push_back({path, label, domain, Split::test});
      }
    }
    return records;
  };

  std::vector<ImageRecord> records =
      split_dataset(write_domain(config.artifact_family, in_domain_tag(config.artifact_family), config.count_per_class),
                    config.split, config.seed, &std::cerr);
  for (ArtifactFamily family : config.ood_families) {
    std::vector<ImageRecord> ood = write_domain(family, ood_domain_tag(family), config.ood_count_per_class);
    records.insert(records.end(), ood.begin(), ood.end());
  }
  write_manifest(out_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace spyglass
