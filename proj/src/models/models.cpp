#include "models/models.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "nn/layers.hpp"

namespace gdce::models {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* known : keys) ok = ok || k == known;
    if (!ok) throw UsageError(std::string("unknown ") + what + " key '" + k + "'");
  }
}

json conv(int in, int out) { return {{"kind", "conv3x3"}, {"in", in}, {"out", out}}; }
json leaky() { return {{"kind", "leaky-relu"}, {"slope", 0.01}}; }
json pool() { return {{"kind", "avgpool2x2"}}; }
json dense(int in, int out) { return {{"kind", "dense"}, {"in", in}, {"out", out}}; }

}  // namespace

// ---- configs -------------------------------------------------------------

void GdceConfig::validate() const {
  if (layers < 1) throw UsageError("gdce.layers must be >= 1");
  if (iterations < 1) throw UsageError("gdce.iterations must be >= 1");
  if (conv_channels < 1 || dense1 < 1 || dense2 < 1 || grid < 1) {
    throw UsageError("gdce layer sizes must be positive");
  }
  if (image_size < grid) throw UsageError("gdce.image_size must be at least the pooling grid");
}

json GdceConfig::to_json() const {
  return {{"layers", layers}, {"conv_channels", conv_channels}, {"iterations", iterations},
          {"dense1", dense1}, {"dense2", dense2}, {"grid", grid}, {"image_size", image_size}};
}

GdceConfig GdceConfig::from_json(const json& j) {
  reject_unknown(j, {"layers", "conv_channels", "iterations", "dense1", "dense2", "grid", "image_size"}, "gdce");
  GdceConfig c;
  c.layers = get_or(j, "layers", c.layers);
  c.conv_channels = get_or(j, "conv_channels", c.conv_channels);
  c.iterations = get_or(j, "iterations", c.iterations);
  c.dense1 = get_or(j, "dense1", c.dense1);
  c.dense2 = get_or(j, "dense2", c.dense2);
  c.grid = get_or(j, "grid", c.grid);
  c.image_size = get_or(j, "image_size", c.image_size);
  c.validate();
  return c;
}

void DiscriminatorConfig::validate() const {
  if (classes < 2) throw UsageError("classifier needs at least 2 classes");
  if (channels.empty()) throw UsageError("classifier needs at least one conv block");
  for (int c : channels) {
    if (c < 1) throw UsageError("classifier channel counts must be positive");
  }
  if (hidden < 1 || grid < 1) throw UsageError("classifier head sizes must be positive");
}

json DiscriminatorConfig::to_json() const {
  return {{"classes", classes}, {"channels", channels}, {"hidden", hidden}, {"grid", grid}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const json& j) {
  reject_unknown(j, {"classes", "channels", "hidden", "grid"}, "classifier");
  DiscriminatorConfig c;
  c.classes = get_or(j, "classes", c.classes);
  c.channels = get_or(j, "channels", c.channels);
  c.hidden = get_or(j, "hidden", c.hidden);
  c.grid = get_or(j, "grid", c.grid);
  c.validate();
  return c;
}

void PerceptualConfig::validate() const {
  if (channels.empty()) throw UsageError("perceptual extractor needs at least one block");
  for (int c : channels) {
    if (c < 1) throw UsageError("perceptual channel counts must be positive");
  }
  if (tap < 1 || tap > static_cast<int>(channels.size())) {
    throw UsageError("perceptual tap index " + std::to_string(tap) + " beyond stack depth " +
                     std::to_string(channels.size()));
  }
}

json PerceptualConfig::to_json() const {
  return {{"channels", channels}, {"tap", tap}, {"seed", seed}};
}

PerceptualConfig PerceptualConfig::from_json(const json& j) {
  reject_unknown(j, {"channels", "tap", "seed"}, "perceptual");
  PerceptualConfig c;
  c.channels = get_or(j, "channels", c.channels);
  c.tap = get_or(j, "tap", c.tap);
  c.seed = get_or(j, "seed", c.seed);
  c.validate();
  return c;
}

// ---- descriptors ---------------------------------------------------------

json gdce_descriptor(const GdceConfig& cfg) {
  cfg.validate();
  json layers = json::array();
  int in = 1;
  int size = cfg.image_size;
  for (int l = 0; l < cfg.layers; ++l) {
    layers.push_back(conv(in, cfg.conv_channels));
    layers.push_back(leaky());
    if (size / 2 >= cfg.grid) {
      layers.push_back(pool());
      size /= 2;
    }
    in = cfg.conv_channels;
  }
  layers.push_back({{"kind", "adaptive-avgpool"}, {"out_h", cfg.grid}, {"out_w", cfg.grid}});
  layers.push_back(dense(cfg.conv_channels * cfg.grid * cfg.grid, cfg.dense1));
  layers.push_back(leaky());
  layers.push_back(dense(cfg.dense1, cfg.dense2));
  layers.push_back(leaky());
  layers.push_back(dense(cfg.dense2, cfg.iterations));
  layers.push_back({{"kind", "tanh"}});
  return {{"role", kGdceRole}, {"config", cfg.to_json()}, {"layers", layers}};
}

json discriminator_descriptor(const DiscriminatorConfig& cfg) {
  cfg.validate();
  json layers = json::array();
  int in = 1;
  for (int c : cfg.channels) {
    layers.push_back(conv(in, c));
    layers.push_back(leaky());
    layers.push_back(pool());
    in = c;
  }
  layers.push_back({{"kind", "adaptive-avgpool"}, {"out_h", cfg.grid}, {"out_w", cfg.grid}});
  layers.push_back(dense(in * cfg.grid * cfg.grid, cfg.hidden));
  layers.push_back(leaky());
  layers.push_back(dense(cfg.hidden, cfg.classes));
  return {{"role", kDiscriminatorRole}, {"config", cfg.to_json()}, {"layers", layers}};
}

json perceptual_descriptor(const PerceptualConfig& cfg) {
  cfg.validate();
  json layers = json::array();
  int in = 1;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    layers.push_back(conv(in, cfg.channels[i]));
    layers.push_back(leaky());
    // Pool between pairs of blocks, as in a VGG stage.
    if (i % 2 == 1 && i + 1 < cfg.channels.size()) layers.push_back(pool());
    in = cfg.channels[i];
  }
  return {{"role", kPerceptualRole}, {"config", cfg.to_json()}, {"layers", layers}};
}

// ---- builders ------------------------------------------------------------

template <typename T>
void zero_output_head(nn::Network<T>& gdce) {
  for (std::size_t i = gdce.depth(); i-- > 0;) {
    if (gdce.layer(i).kind() == nn::LayerKind::Dense) {
      for (auto* p : gdce.layer(i).params()) std::fill(p->value.begin(), p->value.end(), T(0));
      return;
    }
  }
}

template <typename T>
nn::Network<T> make_gdce(const GdceConfig& cfg, std::uint64_t seed) {
  nn::Network<T> net(gdce_descriptor(cfg), seed);
  zero_output_head(net);
  return net;
}

template <typename T>
nn::Network<T> make_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return nn::Network<T>(discriminator_descriptor(cfg), seed);
}

template <typename T>
nn::Network<T> make_perceptual(const PerceptualConfig& cfg) {
  nn::Network<T> net(perceptual_descriptor(cfg), cfg.seed);
  net.set_frozen(true);
  return net;
}

int gdce_iterations(const nn::Network<float>& gdce) {
  if (gdce.role() != kGdceRole) throw DataError("network is not a gdce model");
  return gdce.descriptor().at("config").at("iterations").get<int>();
}

std::size_t perceptual_tap_depth(const json& descriptor) {
  const int tap = descriptor.at("config").at("tap").get<int>();
  int convs = 0;
  const auto& layers = descriptor.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].at("kind") == "conv3x3") ++convs;
    // The tap is the activation right after the tap-th convolution.
    if (convs == tap && layers[i].at("kind") == "leaky-relu") return i + 1;
  }
  throw UsageError("perceptual tap index " + std::to_string(tap) + " beyond stack depth");
}

// ---- tensors -------------------------------------------------------------

template <typename T>
nn::Tensor<T> to_tensor(const std::vector<const image::RealImage*>& images) {
  if (images.empty()) throw DataError("empty image batch");
  const int h = images.front()->height, w = images.front()->width;
  nn::Tensor<T> t(nn::Shape{static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) throw DataError("batch images differ in size");
    std::transform(images[i]->values.begin(), images[i]->values.end(), t.sample(static_cast<int>(i)),
                   [](double v) { return static_cast<T>(v); });
  }
  return t;
}

template <typename T>
nn::Tensor<T> to_tensor(const image::UnitImage& img) {
  nn::Tensor<T> t(nn::Shape{1, 1, img.height(), img.width()});
  std::transform(img.values().begin(), img.values().end(), t.data.begin(),
                 [](double v) { return static_cast<T>(v); });
  return t;
}

template <typename T>
nn::Tensor<T> to_tensor(const image::RealImage& img) {
  return to_tensor<T>(std::vector<const image::RealImage*>{&img});
}

// ---- operations ----------------------------------------------------------

std::vector<curve::CurveCoefficients> gdce_predict(nn::Network<float>& gdce, const nn::Tensor<float>& batch) {
  if (gdce.role() != kGdceRole) throw DataError("network is not a gdce model");
  for (float v : batch.data) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("gdce input outside [0,1]");
  }
  const auto out = gdce.forward(batch);
  const int n_iter = out.shape.c;
  // float tanh saturates to exactly 1 for large inputs; keep the open interval.
  const double bound = std::nextafter(1.0f, 0.0f);
  std::vector<curve::CurveCoefficients> result;
  for (int i = 0; i < batch.shape.n; ++i) {
    std::vector<double> a(static_cast<std::size_t>(n_iter));
    for (int k = 0; k < n_iter; ++k) {
      a[static_cast<std::size_t>(k)] = std::clamp(static_cast<double>(out.sample(i)[k]), -bound, bound);
    }
    result.emplace_back(std::move(a));
  }
  return result;
}

Enhanced enhance(nn::Network<float>& gdce, const image::UnitImage& img) {
  auto coeffs = gdce_predict(gdce, to_tensor<float>(img));
  auto out = curve::apply_curve(img, coeffs.front());
  return {std::move(out), std::move(coeffs.front())};
}

std::vector<float> discriminate(nn::Network<float>& d, const nn::Tensor<float>& batch) {
  if (d.role() != kDiscriminatorRole) throw DataError("network is not a discriminator");
  const auto y = d.forward(batch);
  return {y.data.begin(), y.data.end()};
}

template <typename T>
nn::Tensor<T> perceptual_features(nn::Network<T>& v, const nn::Tensor<T>& batch) {
  if (v.role() != kPerceptualRole) throw DataError("network is not a perceptual extractor");
  return v.forward(batch, perceptual_tap_depth(v.descriptor()));
}

#define GDCE_INSTANTIATE(T)                                                            \
  template void zero_output_head<T>(nn::Network<T>&);                                 \
  template nn::Network<T> make_gdce<T>(const GdceConfig&, std::uint64_t);             \
  template nn::Network<T> make_discriminator<T>(const DiscriminatorConfig&, std::uint64_t); \
  template nn::Network<T> make_perceptual<T>(const PerceptualConfig&);                \
  template nn::Tensor<T> to_tensor<T>(const std::vector<const image::RealImage*>&);   \
  template nn::Tensor<T> to_tensor<T>(const image::UnitImage&);                       \
  template nn::Tensor<T> to_tensor<T>(const image::RealImage&);                       \
  template nn::Tensor<T> perceptual_features<T>(nn::Network<T>&, const nn::Tensor<T>&);

GDCE_INSTANTIATE(float)
GDCE_INSTANTIATE(double)

#undef GDCE_INSTANTIATE

}  // namespace gdce::models
