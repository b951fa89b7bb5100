#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "image/image.hpp"

// Synthetic stand-in for multi-vendor radiographs: label-bearing spatial
// texture with identical global intensity statistics across classes, and
// monotone acquisition shifts applied per domain.
namespace gdce::synth {

// Elliptical elements: count and size ranges for one class.
struct ClassTexture {
  int count_min = 1;
  int count_max = 1;
  double sigma_min = 1.0;
  double sigma_max = 1.0;
};

struct SynthSpec {
  std::vector<std::string> class_names = {"A", "B", "C", "D"};
  std::vector<ClassTexture> textures;  // one per class; defaults filled by validate()
  int train_per_class = 400;
  int test_per_class = 100;
  int image_size = 64;
  int bit_depth = 16;
  std::uint64_t seed = 1;

  int classes() const { return static_cast<int>(class_names.size()); }
  // Fills default textures when none are given; throws UsageError if the
  // spec cannot be satisfied.
  void validate();
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

std::vector<ClassTexture> default_textures(int classes);

struct ShiftProfile {
  double gamma = 1.0;
  double sigmoid_gain = 0.0;   // logistic slope; 0 disables the S-curve
  double sigmoid_center = 0.5;
  double window_shift = 0.0;   // additive offset as a fraction of full range
  int out_bit_depth = 16;
  double noise_std = 0.0;      // optional robustness study; breaks monotonicity
  std::uint64_t seed = 0;

  void validate() const;
  bool is_identity() const;
  nlohmann::json to_json() const;
  static ShiftProfile from_json(const nlohmann::json& j);
};

// Renders one sample of class `label` with intensities rank-mapped onto a
// fixed uniform ladder (every image has the same histogram).
image::UnitImage render_sample(const SynthSpec& spec, int label, std::uint64_t sample_seed);

// Shift response before quantization (noise excluded).
double shift_response(double x, const ShiftProfile& p);

// Logistic S-curve -> power law -> offset with clamp -> quantization.
image::RawImage apply_shift(const image::UnitImage& img, const ShiftProfile& p,
                            std::uint64_t image_index = 0);

struct DomainSplit {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
};

// Writes <out>/<domain>/{train,test}.json plus images. A profile, if given,
// is applied to every sample; draws are seeded by `domain` so two domains
// never share samples.
DomainSplit generate_domain(const SynthSpec& spec, const std::string& domain,
                            const ShiftProfile* profile, const std::filesystem::path& out_dir);

struct DomainPair {
  DomainSplit reference;
  DomainSplit shifted;
};

DomainPair make_domain_pair(const SynthSpec& spec, const ShiftProfile& profile,
                            const std::filesystem::path& out_dir);

// Re-renders every image of `manifest` through `profile` (paired shift of
// an existing dataset). Returns the new manifest path.
std::filesystem::path shift_manifest(const image::DatasetManifest& manifest, const ShiftProfile& profile,
                                     const std::string& scanner, const std::filesystem::path& out_dir);

// Copy of `m` without entries whose class name is listed in `drop`.
image::DatasetManifest drop_classes(const image::DatasetManifest& m, const std::vector<std::string>& drop);

}  // namespace gdce::synth
