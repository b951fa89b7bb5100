// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gdce/gdce.h"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string seed;
  bool force = false;
  bool resume = false;
  bool print_config = false;
  bool quiet = false;
};

void on_progress(const char* msg, void*) { std::fprintf(stderr, "%s\n", msg); }

int fail(gdce_context* ctx, gdce_status st) {
  std::fprintf(stderr, "error: %s\n", gdce_last_error(ctx));
  return static_cast<int>(st);
}

int run(const std::string& command, const Options& o) {
  gdce_context* ctx = nullptr;
  if (gdce_context_create(&ctx) != GDCE_OK) return GDCE_ERR_INTERNAL;
  struct Guard {
    gdce_context* c;
    ~Guard() { gdce_context_destroy(c); }
  } guard{ctx};
  if (!o.quiet) gdce_set_progress(ctx, on_progress, nullptr);

  std::uint64_t seed = 0;
  if (!o.seed.empty()) {
    char* end = nullptr;
    seed = std::strtoull(o.seed.c_str(), &end, 0);
    if (!end || *end != '\0' || o.seed[0] == '-') {
      std::fprintf(stderr, "error: invalid --seed '%s'\n", o.seed.c_str());
      return GDCE_ERR_USAGE;
    }
  }
  std::vector<const char*> ov;
  for (const auto& s : o.overrides) ov.push_back(s.c_str());

  char* cfg = nullptr;
  gdce_status st = gdce_config_resolve(ctx, command.c_str(), o.config.empty() ? nullptr : o.config.c_str(),
                                       ov.data(), ov.size(), o.seed.empty() ? 0 : 1, seed, &cfg);
  if (st != GDCE_OK) return fail(ctx, st);
  if (o.print_config) {
    std::printf("%s\n", cfg);
    gdce_string_free(cfg);
    return 0;
  }
  if (o.out.empty()) {
    gdce_string_free(cfg);
    std::fprintf(stderr, "error: --out is required\n");
    return GDCE_ERR_USAGE;
  }
  unsigned flags = 0;
  if (o.force) flags |= GDCE_RUN_FORCE;
  if (o.resume) flags |= GDCE_RUN_RESUME;
  char* summary = nullptr;
  st = gdce_run(ctx, command.c_str(), cfg, o.out.c_str(), flags, &summary);
  gdce_string_free(cfg);
  if (st != GDCE_OK) return fail(ctx, st);
  std::printf("%s\n", summary);
  gdce_string_free(summary);
  return 0;
}

const char* describe(const std::string& c) {
  if (c == "gen-data") return "Generate the synthetic reference (and optionally shifted) dataset";
  if (c == "shift") return "Re-render a manifest through an acquisition shift profile";
  if (c == "train-clf") return "Train the task classifier on reference-domain images";
  if (c == "train-gdce") return "Train the curve predictor against the frozen classifier";
  if (c == "apply") return "Enhance images with a trained curve predictor and log coefficients";
  if (c == "curve") return "Apply explicit curve coefficients, or fit them to a gamma curve";
  if (c == "eval") return "Evaluate a classifier (optionally behind an enhancer) on a manifest";
  if (c == "ablate") return "Train enhancers over a grid of depths and iteration counts";
  if (c == "gradcheck") return "Finite-difference check of every differentiable op";
  if (c == "crossval") return "Rotate manifest folds and average test metrics";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global curve harmonization for cross-vendor X-ray images"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gdce_version());
  Options o;
  const std::vector<std::string> commands = {"gen-data", "shift", "train-clf", "train-gdce", "apply",
                                             "curve", "eval", "ablate", "gradcheck", "crossval"};
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c, describe(c));
    sub->add_option("-c,--config", o.config, "JSON configuration file");
    sub->add_option("-s,--set", o.overrides, "Override, key.sub=value (repeatable)");
    sub->add_option("-o,--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Seed (overrides GDCE_SEED and the config)");
    sub->add_flag("-f,--force", o.force, "Write into a non-empty output directory");
    if (c == "train-clf" || c == "train-gdce") sub->add_flag("--resume", o.resume, "Resume from state.ckpt");
    sub->add_flag("--print-config", o.print_config, "Print the effective configuration and exit");
    sub->add_flag("-q,--quiet", o.quiet, "No progress output");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return GDCE_ERR_USAGE;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
