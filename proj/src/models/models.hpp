#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "curve/curve.hpp"
#include "image/image.hpp"
#include "nn/network.hpp"

// The three networks of the harmonization pipeline: the curve-coefficient
// predictor, the frozen task classifier used as its supervisor, and the
// fixed feature extractor behind the appearance loss.
namespace gdce::models {

inline constexpr const char* kGdceRole = "gdce";
inline constexpr const char* kDiscriminatorRole = "discriminator";
inline constexpr const char* kPerceptualRole = "perceptual";

struct GdceConfig {
  int layers = 4;          // conv (+ pool) blocks
  int conv_channels = 16;
  int iterations = curve::kDefaultIterations;
  int dense1 = 128;
  int dense2 = 64;
  int grid = 4;            // adaptive pooling output size
  int image_size = 64;     // decides how many blocks pool

  void validate() const;
  nlohmann::json to_json() const;
  static GdceConfig from_json(const nlohmann::json& j);
};

struct DiscriminatorConfig {
  int classes = 4;
  std::vector<int> channels = {16, 32, 64, 64};
  int hidden = 64;
  int grid = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

struct PerceptualConfig {
  std::vector<int> channels = {8, 8, 16, 16};
  int tap = 2;  // 1-based index of the conv block whose activation is compared
  std::uint64_t seed = 0x5eed5eedULL;

  void validate() const;
  nlohmann::json to_json() const;
  static PerceptualConfig from_json(const nlohmann::json& j);
};

// Blocks are conv3x3 + leaky-relu, followed by a 2x2 average pool while the
// feature map is still at least twice the adaptive grid; deeper blocks run at
// grid resolution. The head is three dense layers ending in tanh.
nlohmann::json gdce_descriptor(const GdceConfig& cfg);
nlohmann::json discriminator_descriptor(const DiscriminatorConfig& cfg);
nlohmann::json perceptual_descriptor(const PerceptualConfig& cfg);

// The last dense layer starts at zero, so a fresh predictor is the identity
// enhancement.
template <typename T>
nn::Network<T> make_gdce(const GdceConfig& cfg, std::uint64_t seed);
template <typename T>
nn::Network<T> make_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
// Always frozen.
template <typename T>
nn::Network<T> make_perceptual(const PerceptualConfig& cfg);

template <typename T>
void zero_output_head(nn::Network<T>& gdce);

int gdce_iterations(const nn::Network<float>& gdce);
// Number of leading layers that produce the tap activation.
std::size_t perceptual_tap_depth(const nlohmann::json& descriptor);

// Packs equally sized images into an (n, 1, h, w) tensor.
template <typename T>
nn::Tensor<T> to_tensor(const std::vector<const image::RealImage*>& images);
template <typename T>
nn::Tensor<T> to_tensor(const image::UnitImage& img);
template <typename T>
nn::Tensor<T> to_tensor(const image::RealImage& img);

// Coefficients for each image in `batch`, strictly inside (-1, 1).
std::vector<curve::CurveCoefficients> gdce_predict(nn::Network<float>& gdce,
                                                   const nn::Tensor<float>& batch);

struct Enhanced {
  image::UnitImage image;
  curve::CurveCoefficients coefficients;
};

Enhanced enhance(nn::Network<float>& gdce, const image::UnitImage& img);

// Class logits for one (n, 1, h, w) batch, row-major [sample][class].
std::vector<float> discriminate(nn::Network<float>& d, const nn::Tensor<float>& batch);

template <typename T>
nn::Tensor<T> perceptual_features(nn::Network<T>& v, const nn::Tensor<T>& batch);

}  // namespace gdce::models
