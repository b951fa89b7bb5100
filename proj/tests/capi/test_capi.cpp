// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "gdce/gdce.h"
#include "support/tmpdir.hpp"

namespace {

struct Ctx {
  gdce_context* p = nullptr;
  Ctx() { REQUIRE(gdce_context_create(&p) == GDCE_OK); }
  ~Ctx() { gdce_context_destroy(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  gdce_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("context basics") {
  CHECK(std::strlen(gdce_version()) > 0);
  CHECK(gdce_context_create(nullptr) == GDCE_ERR_USAGE);
  Ctx c;
  char* names = nullptr;
  REQUIRE(gdce_commands(c.p, &names) == GDCE_OK);
  const auto list = take(names);
  CHECK(list.find("train-gdce") != std::string::npos);
  CHECK(list.find("gradcheck") != std::string::npos);
}

TEST_CASE("configuration errors map to usage status") {
  Ctx c;
  char* out = nullptr;
  const char* bad[] = {"nonsense=1"};
  CHECK(gdce_config_resolve(c.p, "train-clf", nullptr, bad, 1, 0, 0, &out) == GDCE_ERR_USAGE);
  CHECK(std::string(gdce_last_error(c.p)).find("nonsense") != std::string::npos);
  CHECK(gdce_config_resolve(c.p, "nope", nullptr, nullptr, 0, 0, 0, &out) == GDCE_ERR_USAGE);
  const char* good[] = {"epochs=2"};
  REQUIRE(gdce_config_resolve(c.p, "train-clf", nullptr, good, 1, 1, 77, &out) == GDCE_OK);
  const auto cfg = take(out);
  CHECK(cfg.find("\"seed\": 77") != std::string::npos);
  CHECK(cfg.find("\"epochs\": 2") != std::string::npos);
  CHECK(gdce_run(c.p, "train-clf", "{not json", "/tmp/x", 0, nullptr) == GDCE_ERR_USAGE);
}

TEST_CASE("images and curves") {
  Ctx c;
  TempDir d("capi");
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i / 15.0;
  gdce_image* img = nullptr;
  REQUIRE(gdce_image_create(c.p, 4, 4, v.data(), &img) == GDCE_OK);
  CHECK(gdce_image_width(img) == 4);
  CHECK(gdce_image_height(img) == 4);

  const double alphas[] = {0.5, 0.5};
  gdce_image* bright = nullptr;
  REQUIRE(gdce_curve_apply(c.p, img, alphas, 2, &bright) == GDCE_OK);
  const double* b = gdce_image_data(bright);
  for (int i = 0; i < 16; ++i) {
    double x = v[i];
    for (double a : alphas) x = x + a * x * (1 - x);
    CHECK(b[i] == doctest::Approx(x).epsilon(1e-12));
  }
  const double bad_alpha[] = {1.5};
  gdce_image* none = nullptr;
  CHECK(gdce_curve_apply(c.p, img, bad_alpha, 1, &none) == GDCE_ERR_DATA);
  CHECK(none == nullptr);

  const auto path = (d / "x.png").string();
  REQUIRE(gdce_image_save(c.p, bright, path.c_str(), 16) == GDCE_OK);
  gdce_image* back = nullptr;
  REQUIRE(gdce_image_load(c.p, path.c_str(), "bitdepth", &back) == GDCE_OK);
  for (int i = 0; i < 16; ++i) CHECK(std::abs(gdce_image_data(back)[i] - b[i]) <= 1.0 / 65535.0);
  CHECK(gdce_image_load(c.p, path.c_str(), "zscore", &none) == GDCE_ERR_USAGE);
  CHECK(gdce_image_load(c.p, (d / "missing.png").string().c_str(), "full-range", &none) == GDCE_ERR_DATA);

  const std::vector<double> out_of_range(16, 2.0);
  CHECK(gdce_image_create(c.p, 4, 4, out_of_range.data(), &none) != GDCE_OK);

  gdce_model* model = nullptr;
  CHECK(gdce_model_load(c.p, path.c_str(), &model) == GDCE_ERR_DATA);

  gdce_image_destroy(back);
  gdce_image_destroy(bright);
  gdce_image_destroy(img);
}

TEST_CASE("run reports numerical status and progress") {
  Ctx c;
  TempDir d("capirun");
  std::vector<std::string> seen;
  gdce_set_progress(c.p, [](const char* m, void* u) { static_cast<std::vector<std::string>*>(u)->push_back(m); }, &seen);
  char* cfg = nullptr;
  REQUIRE(gdce_config_resolve(c.p, "gradcheck", nullptr, nullptr, 0, 0, 0, &cfg) == GDCE_OK);
  const auto ok_cfg = take(cfg);
  char* summary = nullptr;
  REQUIRE(gdce_run(c.p, "gradcheck", ok_cfg.c_str(), (d / "ok").string().c_str(), 0, &summary) == GDCE_OK);
  CHECK(take(summary).find("passed") != std::string::npos);

  const char* strict[] = {"tolerance=1e-30", "curve_tolerance=1e-30"};
  REQUIRE(gdce_config_resolve(c.p, "gradcheck", nullptr, strict, 2, 0, 0, &cfg) == GDCE_OK);
  const auto strict_cfg = take(cfg);
  CHECK(gdce_run(c.p, "gradcheck", strict_cfg.c_str(), (d / "strict").string().c_str(), 0, nullptr) ==
        GDCE_ERR_NUMERICAL);

  // Non-empty output directory without the force flag.
  CHECK(gdce_run(c.p, "gradcheck", ok_cfg.c_str(), (d / "ok").string().c_str(), 0, nullptr) == GDCE_ERR_USAGE);
  CHECK(gdce_run(c.p, "gradcheck", ok_cfg.c_str(), (d / "ok").string().c_str(), GDCE_RUN_FORCE, nullptr) == GDCE_OK);
}
