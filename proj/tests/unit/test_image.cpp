#include <doctest.h>

#include <cmath>
#include <fstream>

#include <png.h>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "common/rng.hpp"
#include "image/image.hpp"
#include "support/tmpdir.hpp"

using namespace gdce;
using namespace gdce::image;

namespace {

RawImage raw(std::vector<std::uint16_t> px, int bits = 16) {
  RawImage r;
  r.width = static_cast<int>(px.size());
  r.height = 1;
  r.bit_depth = bits;
  r.pixels = std::move(px);
  return r;
}

void write_pgm(const std::filesystem::path& p, int w, int h, int maxval, const std::vector<int>& px) {
  std::ofstream f(p, std::ios::binary);
  f << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  for (int v : px) {
    if (maxval > 255) f.put(static_cast<char>(v >> 8));
    f.put(static_cast<char>(v & 0xff));
  }
}

void write_rgb_png(const std::filesystem::path& p) {
  FILE* fp = std::fopen(p.c_str(), "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, 2, 2, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  unsigned char row[6] = {1, 2, 3, 4, 5, 6};
  png_write_row(png, row);
  png_write_row(png, row);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("full-range min-max examples") {
  auto u = normalize_full_range(raw({0, 2048, 4095}));
  CHECK(u[0] == 0.0);
  CHECK(u[1] == doctest::Approx(2048.0 / 4095.0).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(0.50012).epsilon(1e-4));
  CHECK(u[2] == 1.0);

  auto c = normalize_full_range(raw({7, 7, 7}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(c[i] == 0.0);

  auto two = normalize_full_range(raw({10, 20}));
  CHECK(two[0] == 0.0);
  CHECK(two[1] == 1.0);
}

TEST_CASE("bit-depth range mode divides by the full scale") {
  auto u = normalize_full_range(raw({0, 2048, 4095}, 12), RangeMode::BitDepth);
  CHECK(u[2] == 1.0);
  CHECK(u[1] == doctest::Approx(2048.0 / 4095.0));
  CHECK(parse_normalization("bitdepth") == Normalization::BitDepth);
}

TEST_CASE("window ramp examples and errors") {
  auto r = raw({1536, 2560, 2048, 0, 65535});
  r.window = Window{2048, 1024};
  auto u = normalize_window(r);
  CHECK(u[0] == 0.0);
  CHECK(u[1] == 1.0);
  CHECK(u[2] == 0.5);
  CHECK(u[3] == 0.0);
  CHECK(u[4] == 1.0);
  CHECK_THROWS_AS(normalize_window(raw({1, 2})), DataError);
}

TEST_CASE("z-score examples") {
  auto z = normalize_zscore(raw({1, 2, 3}));
  CHECK(z.values[0] == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-12));
  CHECK(z.values[1] == doctest::Approx(0.0));
  CHECK(z.values[2] == doctest::Approx(std::sqrt(1.5)).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_zscore(raw({5, 5, 5})), DataError);
}

TEST_CASE("standardizing standardized data changes nothing") {
  auto z1 = normalize_zscore(raw({3, 9, 4, 4, 100, 17}));
  auto z2 = standardize(z1);
  for (std::size_t i = 0; i < z1.values.size(); ++i) CHECK(std::abs(z1.values[i] - z2.values[i]) < 1e-12);
}

TEST_CASE("normalizer properties on random images") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint16_t> px(37);
    for (auto& p : px) p = static_cast<std::uint16_t>(rng.below(4096));
    px[0] = 0;
    px[1] = 4095;
    auto r = raw(px, 12);
    auto u = normalize_full_range(r);
    double lo = 1.0, hi = 0.0;
    for (double v : u.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    r.window = Window{rng.uniform(0, 4095), rng.uniform(1, 3000)};
    auto w = normalize_window(r);
    for (std::size_t i = 0; i < px.size(); ++i) {
      for (std::size_t j = 0; j < px.size(); ++j) {
        if (px[i] <= px[j]) REQUIRE(w[i] <= w[j]);
      }
    }

    auto z = normalize_zscore(r);
    double mean = 0.0, var = 0.0;
    for (double v : z.values) mean += v;
    mean /= static_cast<double>(z.values.size());
    for (double v : z.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(z.values.size());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("pgm loading honours sidecar bit depth") {
  TempDir d("img");
  write_pgm(d / "a.pgm", 3, 1, 65535, {0, 4095, 17});
  write_text_file(d / "a.pgm.json", R"({"bit_depth": 12, "scanner": "s1", "label": 2})");
  auto r = load_image(d / "a.pgm");
  CHECK(r.bit_depth == 12);
  CHECK(r.pixels[1] == 4095);
  CHECK(r.scanner_id == "s1");
  CHECK(r.label == 2);

  write_pgm(d / "b.pgm", 2, 1, 255, {10, 200});
  write_text_file(d / "b.pgm.json", R"({"bit_depth": 4})");
  CHECK_THROWS_WITH_AS(load_image(d / "b.pgm"), doctest::Contains("pixel exceeds bit depth"), DataError);

  auto r8 = raw({300}, 8);
  CHECK_THROWS_WITH_AS(r8.validate(), doctest::Contains("pixel exceeds bit depth"), DataError);

  write_pgm(d / "c.pgm", 1, 1, 255, {3});
  write_text_file(d / "c.pgm.json", R"({"colour": 1})");
  CHECK_THROWS_WITH_AS(load_image(d / "c.pgm"), doctest::Contains("malformed sidecar"), DataError);
}

TEST_CASE("colour rasters are rejected") {
  TempDir d("img");
  write_text_file(d / "c.ppm", "P6\n1 1\n255\nabc");
  CHECK_THROWS_WITH_AS(load_image(d / "c.ppm"), doctest::Contains("grayscale required"), DataError);
  write_rgb_png(d / "c.png");
  CHECK_THROWS_WITH_AS(load_image(d / "c.png"), doctest::Contains("grayscale required"), DataError);
  CHECK_THROWS_AS(load_image(d / "missing.pgm"), DataError);
}

TEST_CASE("save and reload stays within one quantization step") {
  TempDir d("img");
  Rng rng(3);
  std::vector<double> v(64 * 3);
  for (auto& x : v) x = rng.uniform();
  v[0] = 0.0;
  v[1] = 1.0;
  const UnitImage img(64, 3, v);
  for (const char* name : {"r.pgm", "r.png"}) {
    for (int bits : {8, 12, 16}) {
      save_image(img, d / name, bits);
      auto back = normalize_full_range(load_image(d / name));
      const double step = 1.0 / ((1 << bits) - 1);
      double worst = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(back[i] - v[i]));
      CHECK(worst <= step);
    }
  }
}

TEST_CASE("manifest validation") {
  TempDir d("img");
  write_text_file(d / "empty.json", R"({"class_names": ["A","B"], "entries": []})");
  CHECK_THROWS_WITH_AS(load_manifest(d / "empty.json"), doctest::Contains("no entries"), DataError);
  write_text_file(d / "bad.json",
                  R"({"class_names": ["A","B"], "entries": [{"path": "x.pgm", "label": 2, "scanner": "s", "fold": 0}]})");
  CHECK_THROWS_AS(load_manifest(d / "bad.json"), DataError);

  DatasetManifest m;
  m.class_names = {"A", "B"};
  m.entries = {{"x.pgm", 1, "s", 3}};
  save_manifest(m, d / "ok.json");
  auto back = load_manifest(d / "ok.json");
  CHECK(back.entries.size() == 1);
  CHECK(back.entries[0].fold == 3);
  CHECK(back.resolve(back.entries[0]) == d / "x.pgm");
}
