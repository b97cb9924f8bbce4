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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "spyglass/data.hpp"
#include "spyglass/generator.hpp"
#include "spyglass/spectral.hpp"

using namespace spyglass;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spyglass_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<ImageRecord> make_records(std::map<std::pair<int, std::string>, int> counts) {
  std::vector<ImageRecord> out;
  for (const auto& [key, n] : counts) {
    for (int i = 0; i < n; ++i) {
      out.push_back({"img_" + std::to_string(out.size()) + ".png", key.first, key.second, Split::test});
    }
  }
  return out;
}

std::map<Split, int> split_counts(const std::vector<ImageRecord>& records, int label) {
  std::map<Split, int> out;
  for (const auto& r : records)
    if (r.label == label) ++out[r.split];
  return out;
}

// Mann-Whitney estimate of P(score_fake > score_real), ties counted half.
double auc(const std::vector<double>& fake, const std::vector<double>& real) {
  double wins = 0;
  for (double f : fake)
    for (double r : real) wins += f > r ? 1.0 : (f == r ? 0.5 : 0.0);
  return wins / double(fake.size() * real.size());
}

double magnitude_at(const Plane<double>& lum, Index u, Index v) { return std::abs(fft2(lum)(u, v)); }

}  // namespace

TEST_SUITE("data") {

TEST_CASE("decodes a tiny binary pgm") {
  const fs::path dir = scratch_dir("pgm");
  const std::string bytes = std::string("P5\n2 2\n255\n") + std::string{char(0), char(255), char(128), char(64)};
  const Image img = read_image(write_bytes(dir / "t.pgm", bytes));
  REQUIRE(img.height() == 2);
  REQUIRE(img.width() == 2);
  const float expected[] = {0.0f, 1.0f, 128 / 255.0f, 64 / 255.0f};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) CHECK(img.channels[c](i / 2, i % 2) == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("rgba png drops alpha") {
  const fs::path dir = scratch_dir("rgba");
  const unsigned char png[] = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
      0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0xf4, 0x22, 0x7f, 0x8a, 0x00, 0x00, 0x00, 0x11, 0x49,
      0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8, 0xcf, 0xc0, 0xc0, 0xc5, 0xd0, 0xf0, 0xff, 0x04, 0x00, 0x0c, 0x79, 0x03,
      0x51, 0x76, 0x9e, 0xe1, 0x08, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  const Image img = read_image(write_bytes(dir / "a.png", std::string(reinterpret_cast<const char*>(png), sizeof png)));
  REQUIRE(img.height() == 1);
  REQUIRE(img.width() == 2);
  CHECK(img.channels[0](0, 0) == 1.0f);
  CHECK(img.channels[1](0, 0) == 0.0f);
  CHECK(img.channels[1](0, 1) == doctest::Approx(128 / 255.0f));
  CHECK(img.channels[2](0, 1) == 1.0f);
}

TEST_CASE("png round trip and bad inputs") {
  const fs::path dir = scratch_dir("io");
  Image img(3, 4);
  for (int c = 0; c < 3; ++c)
    for (Index i = 0; i < 12; ++i) img.channels[c].data()[i] = float((i * 20 + c * 7) % 256) / 255.0f;
  write_png(dir / "rt.png", img);
  CHECK(read_image(dir / "rt.png") == img);

  try {
    read_image(write_bytes(dir / "notes.png", "GIF89a not really"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("notes.png") != std::string::npos);
  }
  const std::string full = slurp(dir / "rt.png");
  CHECK_THROWS_AS(read_image(write_bytes(dir / "cut.png", full.substr(0, full.size() / 2))), FormatError);
  CHECK_THROWS_AS(read_image(write_bytes(dir / "cut.pgm", "P5\n4 4\n255\nab")), FormatError);
  CHECK_THROWS_AS(read_image(dir / "absent.png"), FormatError);
}

TEST_CASE("split sizes") {
  auto check = [](int n, int train, int val, int test) {
    const auto out = split_dataset(make_records({{{1, "d"}, n}}), {}, 3, nullptr);
    auto c = split_counts(out, 1);
    CHECK(c[Split::train] == train);
    CHECK(c[Split::val] == val);
    CHECK(c[Split::test] == test);
  };
  check(100, 80, 10, 10);
  check(10, 8, 1, 1);

  const auto out = split_dataset(make_records({{{1, "d"}, 600}, {{0, "d"}, 400}}), {}, 9, nullptr);
  const auto real = split_counts(out, 1), fake = split_counts(out, 0);
  CHECK(real.at(Split::train) == 480);
  CHECK(real.at(Split::val) == 60);
  CHECK(real.at(Split::test) == 60);
  CHECK(fake.at(Split::train) == 320);
  CHECK(fake.at(Split::val) == 40);
  CHECK(fake.at(Split::test) == 40);
}

TEST_CASE("splits are disjoint, exhaustive and seeded") {
  const auto records = make_records({{{1, "a"}, 37}, {{0, "a"}, 41}, {{1, "ood_B"}, 12}});
  const auto one = split_dataset(records, {}, 5, nullptr);
  const auto two = split_dataset(records, {}, 5, nullptr);
  const auto other = split_dataset(records, {}, 6, nullptr);
  REQUIRE(one.size() == records.size());
  std::set<std::string> seen;
  bool differs = false;
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].path == records[i].path);
    CHECK(one[i].split == two[i].split);
    seen.insert(one[i].path.string());
    differs = differs || one[i].split != other[i].split;
  }
  CHECK(seen.size() == records.size());
  CHECK(differs);
  std::size_t total = 0;
  for (Split s : {Split::train, Split::val, Split::test}) total += filter_split(one, s).size();
  CHECK(total == records.size());
}

TEST_CASE("tiny strata go to train with a warning") {
  std::ostringstream warn;
  const auto out = split_dataset(make_records({{{0, "rare"}, 2}, {{1, "rare"}, 5}}), {}, 1, &warn);
  for (const auto& r : out)
    if (r.label == 0) CHECK(r.split == Split::train);
  CHECK(warn.str().find("domain=rare") != std::string::npos);
  CHECK_THROWS_AS(split_dataset({}, {0.5, 0.5, 0.5}, 1, nullptr), ConfigError);
}

TEST_CASE("manifest parsing") {
  const fs::path dir = scratch_dir("manifest");
  CHECK(load_manifest(write_bytes(dir / "empty.jsonl", "")).empty());

  const fs::path three = write_bytes(dir / "three.jsonl",
                                     R"({"path":"b.png","label":1,"domain":"x","split":"train"})"
                                     "\n"
                                     R"({"path":"/abs/a.png","label":0,"domain":"y","split":"val"})"
                                     "\n\n"
                                     R"({"path":"sub/c.png","label":1,"domain":"x","split":"test"})"
                                     "\n");
  const auto records = load_manifest(three);
  REQUIRE(records.size() == 3);
  CHECK(records[0].path == dir / "b.png");
  CHECK(records[1].path == fs::path("/abs/a.png"));
  CHECK(records[2].path == dir / "sub/c.png");
  CHECK(records[1].split == Split::val);
  CHECK(records[2].domain == "x");

  auto expect_error = [&](const std::string& body, const std::string& fragment) {
    try {
      load_manifest(write_bytes(dir / "bad.jsonl", body));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  expect_error(R"({"path":"a.png","label":1,"domain":"x","split":"train"})"
               "\n"
               R"({"path":"b.png","label":2,"domain":"x","split":"train"})",
               "bad.jsonl:2:");
  expect_error(R"({"path":"a.png","label":1,"domain":"x","split":"train","extra":1})", "unknown key 'extra'");
  expect_error(R"({"path":"a.png","label":1,"domain":"x"})", "missing key 'split'");
  expect_error(R"({"path":"a.png","label":1,"domain":"x","split":"holdout"})", "holdout");
  expect_error("{not json", "malformed JSON");
}

TEST_CASE("manifest write and load round trip") {
  const fs::path dir = scratch_dir("manifest_rt");
  std::vector<ImageRecord> records{{dir / "imgs/a.png", 1, "astro_synth_A", Split::train},
                                   {dir / "imgs/b.png", 0, "ood_C", Split::test}};
  write_manifest(dir / "m.jsonl", records);
  CHECK(slurp(dir / "m.jsonl").find("\"imgs/a.png\"") != std::string::npos);
  const auto back = load_manifest(dir / "m.jsonl");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].path == records[i].path);
    CHECK(back[i].label == records[i].label);
    CHECK(back[i].domain == records[i].domain);
    CHECK(back[i].split == records[i].split);
  }
}

TEST_CASE("domain tags") {
  CHECK(in_domain_tag(ArtifactFamily::checkerboard) == "astro_synth_A");
  CHECK(ood_domain_tag(ArtifactFamily::resample_grid) == "ood_C");
  CHECK(is_ood_domain("ood_B"));
  CHECK_FALSE(is_ood_domain("astro_synth_A"));
  CHECK(family_from_name("spectral_notch") == ArtifactFamily::spectral_notch);
  CHECK_THROWS_AS(family_from_name("jpeg"), ConfigError);
}

TEST_CASE("generator writes identical files for the same seed") {
  GeneratorConfig config;
  config.count_per_class = 6;
  config.side = 32;
  config.seed = 11;
  config.ood_families = {ArtifactFamily::spectral_notch};
  config.ood_count_per_class = 2;
  const fs::path a = scratch_dir("gen_a"), b = scratch_dir("gen_b");
  const auto ra = generate_synthetic(config, a);
  const auto rb = generate_synthetic(config, b);
  REQUIRE(ra.size() == 16);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(fs::relative(ra[i].path, a) == fs::relative(rb[i].path, b));
    CHECK(ra[i].split == rb[i].split);
    CHECK(slurp(ra[i].path) == slurp(rb[i].path));
  }
  int real = 0, ood = 0;
  for (const auto& r : ra) {
    real += r.label == kRealLabel;
    if (is_ood_domain(r.domain)) {
      ++ood;
      CHECK(r.split == Split::test);
    }
  }
  CHECK(real == 8);
  CHECK(ood == 4);
  CHECK(load_manifest(a / "manifest.jsonl").size() == ra.size());
}

TEST_CASE("checkerboard lifts the corner nyquist bin") {
  GeneratorConfig config;
  config.seed = 2;
  const Index h = config.side / 2;
  for (Index i = 0; i < 20; ++i) {
    const SyntheticSample s = synthesize(config, ArtifactFamily::checkerboard, "astro_synth_A", kFakeLabel, i);
    CHECK(magnitude_at(s.luminance, h, h) > 2.0 * magnitude_at(s.base, h, h));
    const SyntheticSample r = synthesize(config, ArtifactFamily::checkerboard, "astro_synth_A", kRealLabel, i);
    CHECK((r.luminance == r.base).all());
  }
}

TEST_CASE("real images have a falling power spectrum") {
  GeneratorConfig config;
  config.seed = 3;
  const Index n = config.side;
  for (Index i = 0; i < 10; ++i) {
    const Plane<double> lum = synthesize(config, config.artifact_family, "astro_synth_A", kRealLabel, i).luminance;
    const ComplexPlane<double> f = fft2(lum);
    std::vector<double> sum(std::size_t(n / 2), 0.0);
    std::vector<int> count(sum.size(), 0);
    for (Index u = 0; u < n; ++u) {
      for (Index v = 0; v < n; ++v) {
        const double fu = double(u <= n / 2 ? u : n - u), fv = double(v <= n / 2 ? v : n - v);
        const auto r = std::size_t(std::lround(std::hypot(fu, fv)));
        if (r >= 1 && r < sum.size()) {
          sum[r] += std::norm(f(u, v));
          ++count[r];
        }
      }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (std::size_t r = 1; r < sum.size(); ++r) {
      const double x = std::log(double(r)), y = std::log(sum[r] / count[r]);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(slope < 0);
  }
}

TEST_CASE("each family is separable from its paired bases by the nyquist ratio") {
  for (ArtifactFamily family :
       {ArtifactFamily::checkerboard, ArtifactFamily::spectral_notch, ArtifactFamily::resample_grid}) {
    GeneratorConfig config;
    config.seed = 4;
    std::vector<double> fake, real;
    for (Index i = 0; i < 100; ++i) {
      const SyntheticSample s = synthesize(config, family, "probe", kFakeLabel, i);
      fake.push_back(nyquist_band_ratio(s.luminance));
      real.push_back(nyquist_band_ratio(s.base));
    }
    const double a = auc(fake, real);
    INFO("family " << family_name(family) << " auc " << a);
    CHECK(std::max(a, 1.0 - a) > 0.9);
  }
}

TEST_CASE("generator config validation") {
  GeneratorConfig c;
  c.alpha_min = 3;
  c.alpha_max = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.ood_families = {c.artifact_family};
  c.ood_count_per_class = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

}  // TEST_SUITE
