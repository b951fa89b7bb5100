#include "synth/synthshift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"

namespace gdce::synth {

using nlohmann::json;

namespace {

std::uint64_t tag_of(const std::string& s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw UsageError(std::string(what) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* known : keys) ok = ok || k == known;
    if (!ok) throw UsageError(std::string("unknown ") + what + " key '" + k + "'");
  }
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

// Few large elements for the first class down to many small ones for the
// last, with coverage kept roughly constant.
std::vector<ClassTexture> default_textures(int classes) {
  if (classes < 2) throw UsageError("synthetic data needs at least 2 classes");
  std::vector<ClassTexture> t;
  for (int k = 0; k < classes; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(classes - 1);  // 0..1
    const double sigma = 10.0 * std::pow(0.2, f);                                // 10 .. 2
    const double count = 3.0 * std::pow(20.0, f);                               // 3 .. 60
    t.push_back({static_cast<int>(std::round(count * 0.8)), static_cast<int>(std::round(count * 1.2)),
                 sigma * 0.85, sigma * 1.15});
  }
  return t;
}

void SynthSpec::validate() {
  if (classes() < 2) throw UsageError("synthetic spec needs at least 2 classes");
  if (train_per_class < 1 && test_per_class < 1) throw UsageError("synthetic spec requests zero images");
  if (train_per_class < 0 || test_per_class < 0) throw UsageError("image counts must be non-negative");
  if (image_size < 8) throw UsageError("synthetic image size must be at least 8");
  if (bit_depth < 8 || bit_depth > 16) throw UsageError("synthetic bit depth must be in 8..16");
  if (textures.empty()) textures = default_textures(classes());
  if (static_cast<int>(textures.size()) != classes()) {
    throw UsageError("synthetic spec needs one texture per class");
  }
  for (const auto& t : textures) {
    if (t.count_min < 1 || t.count_max < t.count_min || !(t.sigma_min > 0.0) || t.sigma_max < t.sigma_min) {
      throw UsageError("invalid texture parameters");
    }
  }
}

json SynthSpec::to_json() const {
  json tex = json::array();
  for (const auto& t : textures) {
    tex.push_back({{"count_min", t.count_min}, {"count_max", t.count_max},
                   {"sigma_min", t.sigma_min}, {"sigma_max", t.sigma_max}});
  }
  return {{"class_names", class_names}, {"textures", tex}, {"train_per_class", train_per_class},
          {"test_per_class", test_per_class}, {"image_size", image_size}, {"bit_depth", bit_depth},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  reject_unknown(j, {"class_names", "textures", "train_per_class", "test_per_class", "image_size", "bit_depth", "seed"},
                 "synth");
  SynthSpec s;
  try {
    if (j.contains("class_names")) s.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("textures") && !j.at("textures").empty()) {
      for (const auto& t : j.at("textures")) {
        s.textures.push_back({t.at("count_min").get<int>(), t.at("count_max").get<int>(),
                              t.at("sigma_min").get<double>(), t.at("sigma_max").get<double>()});
      }
    }
    s.train_per_class = j.value("train_per_class", s.train_per_class);
    s.test_per_class = j.value("test_per_class", s.test_per_class);
    s.image_size = j.value("image_size", s.image_size);
    s.bit_depth = j.value("bit_depth", s.bit_depth);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

void ShiftProfile::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw UsageError("shift gamma must be > 0");
  if (!(sigmoid_gain >= 0.0) || !std::isfinite(sigmoid_gain)) throw UsageError("sigmoid gain must be >= 0");
  if (!(sigmoid_center >= 0.0 && sigmoid_center <= 1.0)) throw UsageError("sigmoid center must be in [0,1]");
  if (!(window_shift >= -1.0 && window_shift <= 1.0)) throw UsageError("window shift must be in [-1,1]");
  if (out_bit_depth < 1 || out_bit_depth > 16) throw UsageError("output bit depth must be in 1..16");
  if (!(noise_std >= 0.0)) throw UsageError("noise std must be >= 0");
}

bool ShiftProfile::is_identity() const {
  return gamma == 1.0 && sigmoid_gain == 0.0 && window_shift == 0.0 && noise_std == 0.0;
}

json ShiftProfile::to_json() const {
  return {{"gamma", gamma}, {"sigmoid_gain", sigmoid_gain}, {"sigmoid_center", sigmoid_center},
          {"window_shift", window_shift}, {"out_bit_depth", out_bit_depth}, {"noise_std", noise_std},
          {"seed", seed}};
}

ShiftProfile ShiftProfile::from_json(const json& j) {
  reject_unknown(j, {"gamma", "sigmoid_gain", "sigmoid_center", "window_shift", "out_bit_depth", "noise_std", "seed"},
                 "profile");
  ShiftProfile p;
  try {
    p.gamma = j.value("gamma", p.gamma);
    p.sigmoid_gain = j.value("sigmoid_gain", p.sigmoid_gain);
    p.sigmoid_center = j.value("sigmoid_center", p.sigmoid_center);
    p.window_shift = j.value("window_shift", p.window_shift);
    p.out_bit_depth = j.value("out_bit_depth", p.out_bit_depth);
    p.noise_std = j.value("noise_std", p.noise_std);
    p.seed = j.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed shift profile: ") + e.what());
  }
  p.validate();
  return p;
}

image::UnitImage render_sample(const SynthSpec& spec, int label, std::uint64_t sample_seed) {
  if (label < 0 || label >= spec.classes()) throw UsageError("label out of range for synthetic spec");
  const auto& tex = spec.textures.at(static_cast<std::size_t>(label));
  const int n = spec.image_size;
  const auto np = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  Rng rng(sample_seed);
  std::vector<double> field(np, 0.0);

  // Smooth background so regions between elements still carry structure.
  for (int j = 0; j < 3; ++j) {
    const double fx = rng.uniform(-1.5, 1.5), fy = rng.uniform(-1.5, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.05, 0.15);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        field[static_cast<std::size_t>(y * n + x)] +=
            amp * std::cos(2.0 * std::numbers::pi * (fx * x + fy * y) / n + phase);
      }
    }
  }

  const int count = tex.count_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(tex.count_max - tex.count_min + 1)));
  for (int e = 0; e < count; ++e) {
    const double cx = rng.uniform(0.0, n), cy = rng.uniform(0.0, n);
    const double sx = rng.uniform(tex.sigma_min, tex.sigma_max);
    const double sy = sx * rng.uniform(0.5, 1.0);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.6, 1.0);
    const double c = std::cos(theta), s = std::sin(theta);
    const double reach = 3.0 * sx;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        field[static_cast<std::size_t>(y * n + x)] +=
            amp * std::exp(-0.5 * (u * u / (sx * sx) + v * v / (sy * sy)));
      }
    }
  }
  for (auto& f : field) f += 1e-3 * rng.normal();

  // Rank-map onto the uniform ladder k / (P - 1): identical histogram (hence
  // identical mean and spread) for every image regardless of class.
  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return field[a] < field[b]; });
  std::vector<double> out(np);
  for (std::size_t r = 0; r < np; ++r) out[order[r]] = static_cast<double>(r) / static_cast<double>(np - 1);
  return image::UnitImage(n, n, std::move(out));
}

double shift_response(double x, const ShiftProfile& p) {
  double y = x;
  if (p.sigmoid_gain > 0.0) {
    const double lo = logistic(-p.sigmoid_gain * p.sigmoid_center);
    const double hi = logistic(p.sigmoid_gain * (1.0 - p.sigmoid_center));
    y = (logistic(p.sigmoid_gain * (y - p.sigmoid_center)) - lo) / (hi - lo);
    y = std::clamp(y, 0.0, 1.0);
  }
  y = std::pow(y, p.gamma);
  return std::clamp(y + p.window_shift, 0.0, 1.0);
}

image::RawImage apply_shift(const image::UnitImage& img, const ShiftProfile& p, std::uint64_t image_index) {
  p.validate();
  image::RawImage raw;
  raw.width = img.width();
  raw.height = img.height();
  raw.bit_depth = p.out_bit_depth;
  const double scale = static_cast<double>((1u << p.out_bit_depth) - 1u);
  raw.pixels.resize(img.size());
  Rng noise(derive_seed(p.seed, {image_index}));
  for (std::size_t i = 0; i < img.size(); ++i) {
    double y = shift_response(img[i], p);
    if (p.noise_std > 0.0) y = std::clamp(y + p.noise_std * noise.normal(), 0.0, 1.0);
    raw.pixels[i] = static_cast<std::uint16_t>(std::lround(y * scale));
  }
  // The display window that maps the offset range back onto [0,1].
  raw.window = image::Window{(0.5 + p.window_shift) * scale, scale};
  return raw;
}

namespace {

std::string image_name(const std::string& split, const std::string& cls, int idx) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%s_%04d.pgm", split.c_str(), cls.c_str(), idx);
  return buf;
}

}  // namespace

DomainSplit generate_domain(const SynthSpec& spec_in, const std::string& domain, const ShiftProfile* profile,
                            const std::filesystem::path& out_dir) {
  SynthSpec spec = spec_in;
  spec.validate();
  if (profile) profile->validate();
  const auto dom_dir = out_dir / domain;
  std::filesystem::create_directories(dom_dir / "images");
  DomainSplit result{dom_dir / "train.json", dom_dir / "test.json"};
  const std::uint64_t dom_tag = tag_of(domain);
  std::uint64_t image_counter = 0;

  for (const std::string split : {"train", "test"}) {
    const int per_class = split == "train" ? spec.train_per_class : spec.test_per_class;
    image::DatasetManifest m;
    m.class_names = spec.class_names;
    std::vector<double> class_mean(static_cast<std::size_t>(spec.classes()), 0.0);
    for (int k = 0; k < spec.classes(); ++k) {
      for (int i = 0; i < per_class; ++i) {
        const auto seed = derive_seed(spec.seed, {dom_tag, tag_of(split), static_cast<std::uint64_t>(k),
                                                  static_cast<std::uint64_t>(i)});
        const auto unit = render_sample(spec, k, seed);
        image::RawImage raw = profile ? apply_shift(unit, *profile, image_counter) : image::quantize(unit, spec.bit_depth);
        ++image_counter;
        if (!profile) {
          const double mx = static_cast<double>(raw.max_count());
          raw.window = image::Window{mx / 2.0, mx};
        }
        raw.scanner_id = domain;
        raw.label = k;
        for (double v : unit.values()) class_mean[static_cast<std::size_t>(k)] += v;
        const auto name = image_name(split, spec.class_names[static_cast<std::size_t>(k)], i);
        image::save_raw_image(raw, dom_dir / "images" / name);
        m.entries.push_back({"images/" + name, k, domain, i % image::kNumFolds});
      }
    }
    if (per_class > 0) {
      // Global tone must not reveal the class.
      const double denom = static_cast<double>(per_class) * static_cast<double>(spec.image_size * spec.image_size);
      for (auto& v : class_mean) v /= denom;
      const auto [lo, hi] = std::minmax_element(class_mean.begin(), class_mean.end());
      if (*hi - *lo > 0.02 * *hi) throw DataError("per-class mean intensities differ by more than 2%");
      image::save_manifest(m, split == "train" ? result.train_manifest : result.test_manifest);
    }
  }
  return result;
}

DomainPair make_domain_pair(const SynthSpec& spec, const ShiftProfile& profile, const std::filesystem::path& out_dir) {
  profile.validate();
  DomainPair pair;
  pair.reference = generate_domain(spec, "reference", nullptr, out_dir);
  pair.shifted = generate_domain(spec, "shifted", &profile, out_dir);
  write_text_file(out_dir / "profile.json", profile.to_json().dump(2) + "\n");
  SynthSpec s = spec;
  s.validate();
  write_text_file(out_dir / "synth_spec.json", s.to_json().dump(2) + "\n");
  return pair;
}

std::filesystem::path shift_manifest(const image::DatasetManifest& manifest, const ShiftProfile& profile,
                                     const std::string& scanner, const std::filesystem::path& out_dir) {
  profile.validate();
  manifest.validate();
  std::filesystem::create_directories(out_dir / "images");
  image::DatasetManifest out;
  out.class_names = manifest.class_names;
  std::uint64_t idx = 0;
  for (const auto& e : manifest.entries) {
    const auto raw = image::load_image(manifest.resolve(e));
    auto shifted = apply_shift(image::normalize_full_range(raw), profile, idx++);
    shifted.scanner_id = scanner;
    shifted.label = e.label;
    const auto name = std::filesystem::path(e.path).filename().string();
    image::save_raw_image(shifted, out_dir / "images" / name);
    out.entries.push_back({"images/" + name, e.label, scanner, e.fold});
  }
  const auto path = out_dir / "manifest.json";
  image::save_manifest(out, path);
  write_text_file(out_dir / "profile.json", profile.to_json().dump(2) + "\n");
  return path;
}

image::DatasetManifest drop_classes(const image::DatasetManifest& m, const std::vector<std::string>& drop) {
  image::DatasetManifest out;
  out.class_names = m.class_names;
  out.base_dir = m.base_dir;
  for (const auto& name : drop) {
    if (std::find(m.class_names.begin(), m.class_names.end(), name) == m.class_names.end()) {
      throw UsageError("cannot drop unknown class '" + name + "'");
    }
  }
  for (const auto& e : m.entries) {
    const auto& name = m.class_names[static_cast<std::size_t>(e.label)];
    if (std::find(drop.begin(), drop.end(), name) == drop.end()) out.entries.push_back(e);
  }
  return out;
}

}  // namespace gdce::synth
