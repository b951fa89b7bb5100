#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gdce::image {

struct Window {
  double center = 0.0;
  double width = 1.0;
};

// Integer-count raster as read from disk, plus acquisition metadata.
struct RawImage {
  int width = 0;
  int height = 0;
  int bit_depth = 16;
  std::vector<std::uint16_t> pixels;  // row-major, top-left origin
  std::optional<Window> window;
  std::string scanner_id;
  std::optional<int> label;

  std::uint32_t max_count() const { return (1u << bit_depth) - 1u; }

  // Throws DataError on any violated invariant.
  void validate() const;
};

// Real-valued raster with no range restriction (z-score output etc.).
struct RealImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

// Row-major intensities guaranteed to lie in [0, 1].
class UnitImage {
 public:
  UnitImage() = default;
  UnitImage(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

enum class RangeMode {
  MinMax,    // per-image (p - min) / (max - min)
  BitDepth,  // p / (2^bit_depth - 1)
};

UnitImage normalize_full_range(const RawImage& img, RangeMode mode = RangeMode::MinMax);
UnitImage normalize_window(const RawImage& img);
RealImage normalize_zscore(const RawImage& img);
// (v - mean) / population std; throws DataError on zero variance.
RealImage standardize(const RealImage& img);

enum class Normalization { FullRange, BitDepth, Window, ZScore };
Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization n);

// Dispatches to the normalizer named by `n`; the unit-interval results are
// returned as plain reals so all methods share one downstream path.
RealImage normalize(const RawImage& img, Normalization n);

// Reads a binary PGM (P5) or PNG grayscale raster. A sidecar record at
// `<path>.json` may supply window, scanner, label and bit_depth.
RawImage load_image(const std::filesystem::path& path);

// Writes pixels plus a sidecar carrying the metadata fields that are set.
void save_raw_image(const RawImage& img, const std::filesystem::path& path);

// Quantizes to `bit_depth` bits and writes the raster (no sidecar beyond the
// declared bit depth).
void save_image(const UnitImage& img, const std::filesystem::path& path, int bit_depth);

RawImage quantize(const UnitImage& img, int bit_depth);

std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

inline constexpr int kNumFolds = 5;

struct ManifestEntry {
  std::string path;  // as written in the manifest (relative to its directory)
  int label = 0;
  std::string scanner_id;
  int fold = 0;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::filesystem::path resolve(const ManifestEntry& e) const;
  void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace gdce::image
