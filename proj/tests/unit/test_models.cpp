#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "models/models.hpp"
#include "nn/loss.hpp"

using namespace gdce;
using namespace gdce::models;

namespace {

image::UnitImage random_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(size * size));
  for (auto& x : v) x = rng.uniform();
  return image::UnitImage(size, size, v);
}

nn::Network<float> random_gdce(const GdceConfig& cfg, std::uint64_t seed) {
  auto g = make_gdce<float>(cfg, seed);
  for (std::size_t i = 0; i < g.depth(); ++i) g.layer(i).init(seed + 1 + i);
  return g;
}

}  // namespace

TEST_CASE("fresh predictor is the identity enhancement") {
  auto g = make_gdce<float>(GdceConfig{}, 1);
  const auto img = random_image(64, 2);
  const auto e = enhance(g, img);
  for (double a : e.coefficients.alphas()) CHECK(a == 0.0);
  CHECK(e.image.values() == img.values());
}

TEST_CASE("coefficients stay strictly inside (-1,1)") {
  auto g = random_gdce(GdceConfig{}, 3);
  for (auto* p : g.params()) {
    for (auto& v : p->value) v *= 50.0f;  // saturate the tanh head
  }
  for (int k = 0; k < 4; ++k) {
    const auto c = gdce_predict(g, to_tensor<float>(random_image(64, 10 + k)));
    for (double a : c.front().alphas()) CHECK(std::abs(a) < 1.0);
  }
}

TEST_CASE("identical images give identical coefficients") {
  auto g = random_gdce(GdceConfig{}, 4);
  const auto img = random_image(64, 5);
  const image::RealImage r{64, 64, img.values()};
  const auto c = gdce_predict(g, to_tensor<float>(std::vector<const image::RealImage*>{&r, &r}));
  CHECK(std::vector<double>(c[0].alphas().begin(), c[0].alphas().end()) ==
        std::vector<double>(c[1].alphas().begin(), c[1].alphas().end()));
}

TEST_CASE("enhancement preserves intensity order and range") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto g = random_gdce(GdceConfig{}, 20 + s);
    const auto img = random_image(64, 30 + s);
    const auto e = enhance(g, img).image;
    std::vector<std::size_t> idx(img.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return img[a] < img[b]; });
    for (std::size_t k = 1; k < idx.size(); ++k) REQUIRE(e[idx[k - 1]] <= e[idx[k]]);
    for (double v : e.values()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("deep configurations keep a valid shape") {
  for (int layers : {1, 2, 4, 12}) {
    GdceConfig cfg;
    cfg.layers = layers;
    auto g = make_gdce<float>(cfg, 1);
    const auto s = g.output_shape(nn::Shape{1, 1, 64, 64});
    CHECK(s.c == cfg.iterations);
  }
  GdceConfig bad;
  bad.layers = 0;
  CHECK_THROWS_AS(make_gdce<float>(bad, 1), UsageError);
  CHECK_THROWS_AS(GdceConfig::from_json({{"layerz", 3}}), UsageError);
}

TEST_CASE("classifier outputs") {
  auto d = make_discriminator<float>(DiscriminatorConfig{}, 7);
  const auto logits = discriminate(d, nn::Tensor<float>(nn::Shape{1, 1, 64, 64}));
  CHECK(logits.size() == 4);
  for (float v : logits) CHECK(std::isfinite(v));
  std::vector<double> z(logits.begin(), logits.end());
  const auto p = nn::softmax<double>(z);
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("perceptual features") {
  auto v = make_perceptual<double>(PerceptualConfig{});
  CHECK(v.frozen());
  const auto img = random_image(32, 8);
  const auto a = perceptual_features(v, to_tensor<double>(img));
  const auto b = perceptual_features(v, to_tensor<double>(img));
  CHECK(a.data == b.data);

  std::vector<double> gamma(img.values());
  for (auto& x : gamma) x = std::sqrt(x);
  const auto c = perceptual_features(v, to_tensor<double>(image::UnitImage(32, 32, gamma)));
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a.data[i] - c.data[i]);
  CHECK(l1 > 0.0);

  PerceptualConfig deep;
  deep.tap = 5;
  CHECK_THROWS_AS(make_perceptual<double>(deep), UsageError);
  CHECK(make_perceptual<double>(PerceptualConfig{}).checksum() == v.checksum());
}
