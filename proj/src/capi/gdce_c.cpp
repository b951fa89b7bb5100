#include "gdce/gdce.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "curve/curve.hpp"
#include "image/image.hpp"
#include "models/models.hpp"
#include "nn/checkpoint.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"

struct gdce_context {
  std::string error;
  gdce_progress_fn progress = nullptr;
  void* progress_user = nullptr;
};

struct gdce_image {
  gdce::image::UnitImage img;
};

struct gdce_model {
  gdce::nn::Network<float> net;
};

namespace {

gdce_status status_of(gdce::ErrorKind k) {
  switch (k) {
    case gdce::ErrorKind::Usage: return GDCE_ERR_USAGE;
    case gdce::ErrorKind::Data: return GDCE_ERR_DATA;
    case gdce::ErrorKind::Numerical: return GDCE_ERR_NUMERICAL;
  }
  return GDCE_ERR_INTERNAL;
}

template <typename F>
gdce_status guarded(gdce_context* ctx, F&& f) {
  if (!ctx) return GDCE_ERR_USAGE;
  ctx->error.clear();
  try {
    f();
    return GDCE_OK;
  } catch (const gdce::Error& e) {
    ctx->error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    ctx->error = "out of memory";
  } catch (const std::exception& e) {
    ctx->error = e.what();
  } catch (...) {
    ctx->error = "unknown error";
  }
  return GDCE_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) throw gdce::UsageError(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* gdce_version(void) { return "1.0.0"; }

gdce_status gdce_context_create(gdce_context** out) {
  if (!out) return GDCE_ERR_USAGE;
  *out = new (std::nothrow) gdce_context();
  return *out ? GDCE_OK : GDCE_ERR_INTERNAL;
}

void gdce_context_destroy(gdce_context* ctx) { delete ctx; }

const char* gdce_last_error(const gdce_context* ctx) { return ctx ? ctx->error.c_str() : "null context"; }

void gdce_set_progress(gdce_context* ctx, gdce_progress_fn fn, void* user) {
  if (!ctx) return;
  ctx->progress = fn;
  ctx->progress_user = user;
}

void gdce_string_free(char* s) { std::free(s); }

gdce_status gdce_commands(gdce_context* ctx, char** out) {
  return guarded(ctx, [&] {
    need(out, "out");
    std::string s;
    for (const auto& c : gdce::pipeline::command_names()) s += c + "\n";
    *out = dup_string(s);
  });
}

gdce_status gdce_config_resolve(gdce_context* ctx, const char* command, const char* config_path,
                                const char* const* overrides, size_t n_overrides, int has_seed, uint64_t seed,
                                char** out_json) {
  return guarded(ctx, [&] {
    need(command, "command");
    need(out_json, "out_json");
    if (n_overrides) need(overrides, "overrides");
    std::vector<std::string> ov(overrides, overrides + n_overrides);
    std::optional<std::filesystem::path> file;
    if (config_path && *config_path) file = config_path;
    std::optional<std::uint64_t> s;
    if (has_seed) s = seed;
    *out_json = dup_string(gdce::pipeline::resolve_config(command, file, ov, s).dump(2));
  });
}

gdce_status gdce_run(gdce_context* ctx, const char* command, const char* config_json, const char* out_dir,
                     unsigned flags, char** out_summary) {
  return guarded(ctx, [&] {
    need(command, "command");
    need(out_dir, "out_dir");
    const auto cfg = config_json ? nlohmann::json::parse(config_json, nullptr, false) : nlohmann::json::object();
    if (cfg.is_discarded()) throw gdce::UsageError("configuration is not valid JSON");
    gdce::pipeline::RunFlags f;
    f.force = (flags & GDCE_RUN_FORCE) != 0;
    f.resume = (flags & GDCE_RUN_RESUME) != 0;
    gdce::pipeline::ProgressFn progress;
    if (ctx->progress) {
      progress = [ctx](const std::string& m) { ctx->progress(m.c_str(), ctx->progress_user); };
    }
    const auto summary = gdce::pipeline::run(command, cfg, out_dir, f, progress);
    if (out_summary) *out_summary = dup_string(summary.dump(2));
  });
}

gdce_status gdce_image_load(gdce_context* ctx, const char* path, const char* normalization, gdce_image** out) {
  return guarded(ctx, [&] {
    need(path, "path");
    need(out, "out");
    const auto norm = gdce::image::parse_normalization(normalization ? normalization : "full-range");
    if (norm == gdce::image::Normalization::ZScore) {
      throw gdce::UsageError("z-score output is not a unit-interval image");
    }
    const auto real = gdce::image::normalize(gdce::image::load_image(path), norm);
    *out = new gdce_image{gdce::image::UnitImage(real.width, real.height, real.values)};
  });
}

gdce_status gdce_image_create(gdce_context* ctx, int width, int height, const double* values, gdce_image** out) {
  return guarded(ctx, [&] {
    need(values, "values");
    need(out, "out");
    if (width <= 0 || height <= 0) throw gdce::UsageError("image dimensions must be positive");
    std::vector<double> v(values, values + static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    *out = new gdce_image{gdce::image::UnitImage(width, height, std::move(v))};
  });
}

void gdce_image_destroy(gdce_image* img) { delete img; }
int gdce_image_width(const gdce_image* img) { return img ? img->img.width() : 0; }
int gdce_image_height(const gdce_image* img) { return img ? img->img.height() : 0; }
const double* gdce_image_data(const gdce_image* img) { return img ? img->img.values().data() : nullptr; }

gdce_status gdce_image_save(gdce_context* ctx, const gdce_image* img, const char* path, int bit_depth) {
  return guarded(ctx, [&] {
    need(img, "img");
    need(path, "path");
    gdce::image::save_image(img->img, path, bit_depth);
  });
}

gdce_status gdce_curve_apply(gdce_context* ctx, const gdce_image* in, const double* alphas, size_t n,
                             gdce_image** out) {
  return guarded(ctx, [&] {
    need(in, "in");
    need(alphas, "alphas");
    need(out, "out");
    const gdce::curve::CurveCoefficients c(std::vector<double>(alphas, alphas + n));
    *out = new gdce_image{gdce::curve::apply_curve(in->img, c)};
  });
}

gdce_status gdce_model_load(gdce_context* ctx, const char* path, gdce_model** out) {
  return guarded(ctx, [&] {
    need(path, "path");
    need(out, "out");
    auto loaded = gdce::nn::load_checkpoint(path, gdce::models::kGdceRole);
    loaded.network.set_frozen(true);
    *out = new gdce_model{std::move(loaded.network)};
  });
}

void gdce_model_destroy(gdce_model* model) { delete model; }

int gdce_model_iterations(const gdce_model* model) {
  return model ? gdce::models::gdce_iterations(model->net) : 0;
}

gdce_status gdce_model_enhance(gdce_context* ctx, gdce_model* model, const gdce_image* in, gdce_image** out,
                               double* alphas) {
  return guarded(ctx, [&] {
    need(model, "model");
    need(in, "in");
    need(out, "out");
    auto e = gdce::models::enhance(model->net, in->img);
    if (alphas) {
      for (std::size_t i = 0; i < e.coefficients.size(); ++i) alphas[i] = e.coefficients[i];
    }
    *out = new gdce_image{std::move(e.image)};
  });
}

}  // extern "C"
