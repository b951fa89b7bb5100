#include "image/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include <png.h>

#include <json.hpp>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace gdce::image {

using nlohmann::json;

void RawImage::validate() const {
  if (width <= 0 || height <= 0) throw DataError("image dimensions must be positive");
  if (bit_depth < 1 || bit_depth > 16) {
    throw DataError("bit depth " + std::to_string(bit_depth) + " outside 1..16");
  }
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError("pixel buffer length does not match width*height");
  }
  const auto limit = max_count();
  for (auto p : pixels) {
    if (p > limit) throw DataError("pixel exceeds bit depth");
  }
  if (window && !(window->width > 0.0)) throw DataError("window width must be positive");
}

UnitImage::UnitImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) throw DataError("image dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError("value buffer length does not match width*height");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("unit image value outside [0,1]");
  }
}

UnitImage normalize_full_range(const RawImage& img, RangeMode mode) {
  img.validate();
  std::vector<double> out(img.pixels.size(), 0.0);
  if (mode == RangeMode::BitDepth) {
    const double scale = static_cast<double>(img.max_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] / scale;
    return UnitImage(img.width, img.height, std::move(out));
  }
  const auto [lo_it, hi_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi > lo) {
    const double span = hi - lo;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (img.pixels[i] - lo) / span;
  }
  return UnitImage(img.width, img.height, std::move(out));
}

UnitImage normalize_window(const RawImage& img) {
  img.validate();
  if (!img.window) throw DataError("missing window metadata");
  const double lo = img.window->center - img.window->width / 2.0;
  const double hi = img.window->center + img.window->width / 2.0;
  std::vector<double> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp((img.pixels[i] - lo) / (hi - lo), 0.0, 1.0);
  }
  return UnitImage(img.width, img.height, std::move(out));
}

RealImage standardize(const RealImage& img) {
  const auto n = static_cast<double>(img.values.size());
  double mean = 0.0;
  for (double p : img.values) mean += p;
  mean /= n;
  double var = 0.0;
  for (double p : img.values) var += (p - mean) * (p - mean);
  var /= n;
  if (!(var > 0.0)) throw DataError("zero-variance image cannot be z-scored");
  const double sd = std::sqrt(var);
  RealImage out{img.width, img.height, std::vector<double>(img.values.size())};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (img.values[i] - mean) / sd;
  return out;
}

RealImage normalize_zscore(const RawImage& img) {
  img.validate();
  return standardize(RealImage{img.width, img.height, std::vector<double>(img.pixels.begin(), img.pixels.end())});
}

Normalization parse_normalization(const std::string& name) {
  if (name == "full-range" || name == "minmax") return Normalization::FullRange;
  if (name == "bitdepth") return Normalization::BitDepth;
  if (name == "window") return Normalization::Window;
  if (name == "zscore") return Normalization::ZScore;
  throw UsageError("unknown normalization '" + name +
                   "' (expected full-range, bitdepth, window or zscore)");
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::FullRange: return "full-range";
    case Normalization::BitDepth: return "bitdepth";
    case Normalization::Window: return "window";
    case Normalization::ZScore: return "zscore";
  }
  return "full-range";
}

RealImage normalize(const RawImage& img, Normalization n) {
  auto from_unit = [](const UnitImage& u) {
    return RealImage{u.width(), u.height(), u.values()};
  };
  switch (n) {
    case Normalization::FullRange: return from_unit(normalize_full_range(img));
    case Normalization::BitDepth: return from_unit(normalize_full_range(img, RangeMode::BitDepth));
    case Normalization::Window: return from_unit(normalize_window(img));
    case Normalization::ZScore: return normalize_zscore(img);
  }
  throw UsageError("unknown normalization");
}

namespace {

int bits_for_maxval(std::uint32_t maxval) {
  int bits = 1;
  while (((1u << bits) - 1u) < maxval) ++bits;
  return bits;
}

bool has_extension(const std::filesystem::path& p, const char* ext) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

// ---- PNM ---------------------------------------------------------------

void skip_pnm_space(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

long read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  long v = -1;
  in >> v;
  if (!in || v < 0) throw DataError("malformed PNM header");
  return v;
}

RawImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P') throw DataError("unsupported format: " + path.string());
  if (magic[1] == '6' || magic[1] == '3') throw DataError("grayscale required: " + path.string());
  if (magic[1] != '5') throw DataError("unsupported format (binary P5 PGM expected): " + path.string());
  const long w = read_pnm_int(in);
  const long h = read_pnm_int(in);
  const long maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw DataError("malformed PNM header");
  in.get();  // single whitespace before raster
  RawImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bit_depth = bits_for_maxval(static_cast<std::uint32_t>(maxval));
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  img.pixels.resize(n);
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw DataError("truncated PGM raster: " + path.string());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v =
        wide ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
    if (v > maxval) throw DataError("pixel exceeds PGM maxval: " + path.string());
    img.pixels[i] = v;
  }
  return img;
}

void write_pgm(const RawImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto maxval = img.max_count();
  out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(img.pixels.size() * (wide ? 2 : 1));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (wide) {
      buf[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);
      buf[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xff);
    } else {
      buf[i] = static_cast<unsigned char>(img.pixels[i]);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

// ---- PNG ---------------------------------------------------------------

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRead {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  std::string error;
};

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngRead*>(png_get_error_ptr(png));
  if (st) st->error = msg;
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

// Only `st` (caller-owned) is modified after setjmp.
bool png_read_all(std::FILE* f, PngRead* st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st, png_error_cb, png_warning_cb);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  st->width = png_get_image_width(png, info);
  st->height = png_get_image_height(png, info);
  st->bit_depth = png_get_bit_depth(png, info);
  st->color_type = png_get_color_type(png, info);
  if (st->color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
  }
  if (st->bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  st->data.resize(rowbytes * st->height);
  st->rows.resize(st->height);
  for (png_uint_32 y = 0; y < st->height; ++y) st->rows[y] = st->data.data() + y * rowbytes;
  png_read_image(png, st->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawImage read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  PngRead st;
  if (!png_read_all(f.get(), &st)) {
    throw DataError("unsupported format: " + path.string() + (st.error.empty() ? "" : " (" + st.error + ")"));
  }
  if (st.color_type != PNG_COLOR_TYPE_GRAY) throw DataError("grayscale required: " + path.string());
  RawImage img;
  img.width = static_cast<int>(st.width);
  img.height = static_cast<int>(st.height);
  const bool wide = st.bit_depth == 16;
  img.bit_depth = wide ? 16 : st.bit_depth;
  img.pixels.resize(static_cast<std::size_t>(st.width) * st.height);
  for (png_uint_32 y = 0; y < st.height; ++y) {
    const auto* row = st.rows[y];
    for (png_uint_32 x = 0; x < st.width; ++x) {
      img.pixels[y * st.width + x] =
          wide ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]) : row[x];
    }
  }
  return img;
}

struct PngWrite {
  std::string error;
};

void png_write_error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngWrite*>(png_get_error_ptr(png));
  if (st) st->error = msg;
  png_longjmp(png, 1);
}

bool png_write_all(std::FILE* f, const RawImage* img, const std::vector<png_bytep>* rows,
                   PngWrite* st) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, st, png_write_error_cb, png_warning_cb);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  const int depth = img->bit_depth <= 8 ? 8 : 16;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img->width), static_cast<png_uint_32>(img->height),
               depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows->data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const RawImage& img, const std::filesystem::path& path) {
  const bool wide = img.bit_depth > 8;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width) * (wide ? 2 : 1);
  std::vector<unsigned char> data(rowbytes * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (wide) {
      data[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);
      data[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xff);
    } else {
      data[i] = static_cast<unsigned char>(img.pixels[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + y * rowbytes;
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw DataError("cannot write " + path.string());
  PngWrite st;
  if (!png_write_all(f.get(), &img, &rows, &st)) {
    throw DataError("PNG write failed: " + path.string() + " " + st.error);
  }
}

// ---- sidecar -----------------------------------------------------------

void apply_sidecar(RawImage& img, const std::filesystem::path& side) {
  json j;
  try {
    j = json::parse(read_text_file(side));
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar " + side.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("malformed sidecar " + side.string() + ": object expected");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "window") {
        Window w{value.at("center").get<double>(), value.at("width").get<double>()};
        img.window = w;
      } else if (key == "scanner") {
        img.scanner_id = value.get<std::string>();
      } else if (key == "label") {
        img.label = value.get<int>();
      } else if (key == "bit_depth") {
        const int bd = value.get<int>();
        if (bd < 1 || bd > img.bit_depth) {
          throw DataError("sidecar bit_depth " + std::to_string(bd) + " exceeds file container");
        }
        img.bit_depth = bd;
      } else {
        throw DataError("malformed sidecar " + side.string() + ": unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar " + side.string() + ": " + e.what());
  }
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  auto p = image_path;
  p += ".json";
  return p;
}

RawImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());
  RawImage img = has_extension(path, ".png") ? read_png(path) : read_pgm(path);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) apply_sidecar(img, side);
  img.validate();
  return img;
}

void save_raw_image(const RawImage& img, const std::filesystem::path& path) {
  img.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (has_extension(path, ".png")) {
    write_png(img, path);
  } else {
    write_pgm(img, path);
  }
  json side = json::object();
  // PGM maxval already encodes the depth; PNG containers only hold 8 or 16.
  if (has_extension(path, ".png") && img.bit_depth != 8 && img.bit_depth != 16) {
    side["bit_depth"] = img.bit_depth;
  }
  if (img.window) side["window"] = {{"center", img.window->center}, {"width", img.window->width}};
  if (!img.scanner_id.empty()) side["scanner"] = img.scanner_id;
  if (img.label) side["label"] = *img.label;
  const auto sp = sidecar_path(path);
  if (!side.empty()) {
    write_text_file(sp, side.dump(2) + "\n");
  } else if (std::filesystem::exists(sp)) {
    std::filesystem::remove(sp);
  }
}

RawImage quantize(const UnitImage& img, int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) throw UsageError("bit depth must be in 1..16");
  RawImage raw;
  raw.width = img.width();
  raw.height = img.height();
  raw.bit_depth = bit_depth;
  const double scale = static_cast<double>((1u << bit_depth) - 1u);
  raw.pixels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    raw.pixels[i] = static_cast<std::uint16_t>(std::lround(img[i] * scale));
  }
  return raw;
}

void save_image(const UnitImage& img, const std::filesystem::path& path, int bit_depth) {
  save_raw_image(quantize(img, bit_depth), path);
}

// ---- manifest ----------------------------------------------------------

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  return resolve_path(base_dir, e.path);
}

void DatasetManifest::validate() const {
  if (class_names.empty()) throw DataError("manifest has no class names");
  if (entries.empty()) throw DataError("manifest has no entries");
  const int c = num_classes();
  for (const auto& e : entries) {
    if (e.label < 0 || e.label >= c) {
      throw DataError("manifest label " + std::to_string(e.label) + " out of range for " +
                      std::to_string(c) + " classes (" + e.path + ")");
    }
    if (e.fold < 0 || e.fold >= kNumFolds) {
      throw DataError("manifest fold " + std::to_string(e.fold) + " outside [0,5) (" + e.path + ")");
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.path = e.at("path").get<std::string>();
      me.label = e.at("label").get<int>();
      me.scanner_id = e.value("scanner", std::string{});
      me.fold = e.value("fold", 0);
      m.entries.push_back(std::move(me));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  json j;
  j["class_names"] = m.class_names;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"path", e.path}, {"label", e.label}, {"scanner", e.scanner_id}, {"fold", e.fold}});
  }
  write_text_file(path, j.dump(1) + "\n");
}

}  // namespace gdce::image
