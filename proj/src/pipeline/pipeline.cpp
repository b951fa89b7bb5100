#include "pipeline/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "common/rng.hpp"
#include "curve/curve.hpp"
#include "models/models.hpp"
#include "nn/checkpoint.hpp"
#include "pipeline/config.hpp"
#include "pipeline/gradcheck.hpp"
#include "synth/synthshift.hpp"
#include "train/training.hpp"

namespace gdce::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kStateFile = "state.ckpt";
constexpr const char* kLogFile = "train_log.jsonl";

struct Context {
  std::string command;
  json cfg;
  fs::path out;
  RunFlags flags;
  ProgressFn progress;

  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
  void note(const std::string& msg) const {
    if (progress) progress(msg);
  }
};

bool resumable(const std::string& command) {
  return command == "train-clf" || command == "train-gdce";
}

json comparable(json cfg) {
  cfg.erase("stop_after_epoch");
  return cfg;
}

void prepare_out_dir(const Context& c) {
  if (c.out.empty()) throw UsageError("an output directory is required");
  if (c.flags.resume && !resumable(c.command)) throw UsageError(c.command + " cannot be resumed");
  const bool non_empty = fs::exists(c.out) && !(fs::is_directory(c.out) && fs::is_empty(c.out));
  if (fs::exists(c.out) && !fs::is_directory(c.out)) throw UsageError("output path " + c.out.string() + " is not a directory");
  if (c.flags.resume) {
    const auto prev = c.out / "config.json";
    if (!fs::exists(prev)) throw UsageError("nothing to resume in " + c.out.string());
    const json old = json::parse(read_text_file(prev), nullptr, false);
    if (old.is_discarded() || old.value("command", "") != c.command ||
        comparable(old.at("config")) != comparable(c.cfg)) {
      throw UsageError("configuration differs from the run being resumed in " + c.out.string());
    }
  } else if (non_empty && !c.flags.force) {
    throw UsageError("output directory " + c.out.string() + " is not empty (pass --force to overwrite)");
  }
  fs::create_directories(c.out);
  if (!c.flags.resume) fs::remove(c.out / kStateFile);
  write_text_file(c.out / "config.json", json{{"command", c.command}, {"config", c.cfg}}.dump(2) + "\n");
}

std::string str(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

fs::path required_path(const json& cfg, const char* key, const std::string& what) {
  const auto p = str(cfg, key);
  if (p.empty()) throw UsageError(std::string("missing required setting '") + key + "' (" + what + ")");
  return p;
}

train::TrainConfig train_config(const json& cfg) {
  train::TrainConfig t;
  t.lr = cfg.at("lr").get<double>();
  t.batch_size = cfg.at("batch_size").get<int>();
  t.epochs = cfg.at("epochs").get<int>();
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.val_fold = cfg.at("val_fold").get<int>();
  if (cfg.contains("perceptual_sum")) t.perceptual_sum = cfg.at("perceptual_sum").get<bool>();
  if (cfg.contains("stop_after_epoch") && !cfg.at("stop_after_epoch").is_null()) {
    t.stop_after_epoch = cfg.at("stop_after_epoch").get<int>();
  }
  t.validate();
  return t;
}

void write_log(const fs::path& path, const std::vector<train::EpochRecord>& log,
               const std::vector<std::string>& class_names) {
  std::string text;
  for (const auto& r : log) text += r.to_json(class_names).dump() + "\n";
  write_text_file(path, text);
}

train::EpochSink log_sink(const Context& c, const fs::path& path, const std::vector<std::string>& class_names,
                          const std::string& tag) {
  return [&c, path, class_names, tag](const std::vector<train::EpochRecord>& log) {
    write_log(path, log, class_names);
    const auto& r = log.back();
    std::ostringstream os;
    os << tag << " epoch " << r.epoch << ": loss " << r.loss.total << " (ce " << r.loss.ce << ", perceptual "
       << r.loss.perceptual << "), val worst-group " << r.val_worst_group;
    c.note(os.str());
  };
}

void write_report(const fs::path& dir, const std::string& stem, const eval::MetricsReport& r,
                  const std::vector<std::string>& names, const json& extra = json::object()) {
  json j = r.to_json(names);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_text_file(dir / (stem + ".json"), j.dump(2) + "\n");
  write_text_file(dir / (stem + ".txt"), r.table(names));
}

std::vector<std::string> meta_names(const json& meta) {
  if (!meta.contains("class_names")) throw DataError("checkpoint has no class names");
  return meta.at("class_names").get<std::vector<std::string>>();
}

image::Normalization meta_normalization(const json& meta) {
  return image::parse_normalization(meta.value("normalization", std::string("full-range")));
}

// ---- data commands -------------------------------------------------------

json cmd_gen_data(const Context& c) {
  json sj = c.cfg.at("synth");
  sj["seed"] = c.seed();
  auto spec = synth::SynthSpec::from_json(sj);
  spec.validate();
  json summary;
  if (c.cfg.at("shifted_domain").get<bool>()) {
    json pj = c.cfg.at("shift");
    pj["seed"] = derive_seed(c.seed(), {0x5348494654ULL});
    const auto profile = synth::ShiftProfile::from_json(pj);
    const auto pair = synth::make_domain_pair(spec, profile, c.out);
    summary["reference"] = {{"train", pair.reference.train_manifest.string()},
                            {"test", pair.reference.test_manifest.string()}};
    summary["shifted"] = {{"train", pair.shifted.train_manifest.string()},
                          {"test", pair.shifted.test_manifest.string()}};
  } else {
    const auto split = synth::generate_domain(spec, "reference", nullptr, c.out);
    write_text_file(c.out / "synth_spec.json", spec.to_json().dump(2) + "\n");
    summary["reference"] = {{"train", split.train_manifest.string()}, {"test", split.test_manifest.string()}};
  }
  summary["images"] = spec.classes() * (spec.train_per_class + spec.test_per_class);
  return summary;
}

json cmd_shift(const Context& c) {
  const auto m = image::load_manifest(required_path(c.cfg, "manifest", "manifest to shift"));
  json pj = c.cfg.at("profile");
  pj["seed"] = derive_seed(c.seed(), {0x5348494654ULL});
  const auto profile = synth::ShiftProfile::from_json(pj);
  const auto path = synth::shift_manifest(m, profile, str(c.cfg, "scanner"), c.out);
  write_text_file(c.out / "profile.json", profile.to_json().dump(2) + "\n");
  return {{"manifest", path.string()}, {"images", m.entries.size()}};
}

// ---- training ------------------------------------------------------------

train::SampleSet load_set(const fs::path& manifest, image::Normalization norm,
                          const std::vector<std::string>& drop = {}) {
  auto m = image::load_manifest(manifest);
  if (!drop.empty()) m = synth::drop_classes(m, drop);
  return train::load_samples(m, norm);
}

models::DiscriminatorConfig clf_arch(const json& cfg, int classes) {
  json a = cfg.at("arch");
  if (a.at("classes").is_null()) a["classes"] = classes;
  auto arch = models::DiscriminatorConfig::from_json(a);
  arch.validate();
  return arch;
}

json cmd_train_clf(const Context& c) {
  const auto norm = image::parse_normalization(str(c.cfg, "normalization"));
  const auto all = load_set(required_path(c.cfg, "train_manifest", "reference-domain training manifest"), norm);
  const auto tc = train_config(c.cfg);
  auto [tr, val] = train::split_fold(all, tc.val_fold);
  const auto arch = clf_arch(c.cfg, all.num_classes());
  auto result = train::train_discriminator(tr, val, arch, tc, c.out / kStateFile,
                                           log_sink(c, c.out / kLogFile, all.class_names, "train-clf"));
  json summary = {{"best_epoch", result.best_epoch}, {"best_val_worst_group", result.best_metric},
                  {"epochs_run", result.log.size()}, {"interrupted", result.interrupted}};
  if (result.interrupted) return summary;
  result.best.set_frozen(true);
  const json meta = {{"command", "train-clf"},
                     {"seed", tc.seed},
                     {"normalization", image::to_string(norm)},
                     {"class_names", all.class_names},
                     {"best_epoch", result.best_epoch},
                     {"best_val_worst_group", result.best_metric}};
  nn::save_checkpoint(result.best, c.out / "classifier.ckpt", meta);
  const auto report = train::evaluate_set(result.best, val);
  write_report(c.out, "val_report", report, all.class_names, {{"epoch", result.best_epoch}});
  summary["checkpoint"] = (c.out / "classifier.ckpt").string();
  return summary;
}

struct GdceSetup {
  nn::Network<float> disc;
  nn::Network<float> ext;
  image::Normalization norm = image::Normalization::FullRange;
  std::vector<std::string> class_names;
  train::SampleSet shifted;
  train::ReferencePool pool;
  models::PerceptualConfig perceptual;
};

GdceSetup gdce_setup(const json& cfg, const char* manifest_key, const std::string& manifest_what) {
  GdceSetup s;
  const auto clf_path = str(cfg, "classifier");
  if (clf_path.empty() || !fs::exists(clf_path)) {
    throw DataError("missing prerequisite: classifier checkpoint '" + clf_path +
                    "' not found (run train-clf first and set classifier=<path>)");
  }
  auto loaded = nn::load_checkpoint(clf_path, models::kDiscriminatorRole);
  s.disc = std::move(loaded.network);
  s.disc.set_frozen(true);
  s.norm = meta_normalization(loaded.meta);
  if (s.norm == image::Normalization::ZScore) {
    throw UsageError("the enhancer needs unit-interval inputs; the classifier was trained on z-scored images");
  }
  s.class_names = meta_names(loaded.meta);

  std::vector<std::string> drop;
  if (cfg.contains("drop_classes")) drop = cfg.at("drop_classes").get<std::vector<std::string>>();
  s.shifted = load_set(required_path(cfg, manifest_key, manifest_what), s.norm, drop);
  if (s.shifted.class_names != s.class_names) throw DataError("manifest classes differ from the classifier's");

  const auto ref_path = required_path(cfg, "reference_manifest", "reference-domain images for the appearance loss");
  const auto ref_manifest = image::load_manifest(ref_path);
  for (const auto& e : ref_manifest.entries) {
    if (e.scanner_id != ref_manifest.entries.front().scanner_id) {
      throw DataError("reference pool mixes scanners '" + ref_manifest.entries.front().scanner_id + "' and '" +
                      e.scanner_id + "'");
    }
  }
  for (auto& smp : train::load_samples(ref_manifest, s.norm).samples) s.pool.images.push_back(std::move(smp.input));
  s.pool.validate();

  json pj = cfg.at("perceptual");
  pj["seed"] = models::PerceptualConfig{}.seed;
  s.perceptual = models::PerceptualConfig::from_json(pj);
  s.ext = models::make_perceptual<float>(s.perceptual);
  return s;
}

models::GdceConfig gdce_arch(const json& a, const train::SampleSet& set) {
  auto arch = models::GdceConfig::from_json(a);
  arch.validate();
  if (!set.samples.empty() && set.samples.front().input.width != arch.image_size) {
    throw UsageError("arch.image_size is " + std::to_string(arch.image_size) + " but the images are " +
                     std::to_string(set.samples.front().input.width) + " pixels wide");
  }
  return arch;
}

json gdce_meta(const GdceSetup& s, std::uint64_t seed, const train::TrainResult& r) {
  return {{"command", "train-gdce"},
          {"seed", seed},
          {"normalization", image::to_string(s.norm)},
          {"class_names", s.class_names},
          {"classifier_checksum", s.disc.checksum()},
          {"best_epoch", r.best_epoch},
          {"best_val_worst_group", r.best_metric}};
}

json cmd_train_gdce(const Context& c) {
  auto s = gdce_setup(c.cfg, "train_manifest", "shifted-domain training manifest");
  const auto tc = train_config(c.cfg);
  const auto arch = gdce_arch(c.cfg.at("arch"), s.shifted);
  auto [tr, val] = train::split_fold(s.shifted, tc.val_fold);
  auto result = train::train_gdce(tr, val, s.pool, s.disc, s.ext, arch, tc, c.out / kStateFile,
                                  log_sink(c, c.out / kLogFile, s.class_names, "train-gdce"));
  json summary = {{"best_epoch", result.best_epoch}, {"best_val_worst_group", result.best_metric},
                  {"epochs_run", result.log.size()}, {"interrupted", result.interrupted}};
  if (result.interrupted) return summary;
  nn::save_checkpoint(result.best, c.out / "gdce.ckpt", gdce_meta(s, tc.seed, result));
  const auto report = train::evaluate_set(s.disc, val, &result.best);
  write_report(c.out, "val_report", report, s.class_names, {{"epoch", result.best_epoch}});
  summary["checkpoint"] = (c.out / "gdce.ckpt").string();
  return summary;
}

// ---- inference -----------------------------------------------------------

json alphas_json(const curve::CurveCoefficients& k) {
  json a = json::array();
  for (double v : k.alphas()) a.push_back(v);
  return a;
}

json cmd_apply(const Context& c) {
  const auto ckpt = required_path(c.cfg, "gdce", "enhancer checkpoint");
  auto loaded = nn::load_checkpoint(ckpt, models::kGdceRole);
  const auto norm = meta_normalization(loaded.meta);
  std::vector<fs::path> inputs;
  for (const auto& p : c.cfg.at("images")) inputs.emplace_back(p.get<std::string>());
  if (!str(c.cfg, "manifest").empty()) {
    const auto m = image::load_manifest(str(c.cfg, "manifest"));
    for (const auto& e : m.entries) inputs.push_back(m.resolve(e));
  }
  if (inputs.empty()) throw UsageError("apply needs images=[...] or manifest=<path>");
  const int bits = c.cfg.at("bit_depth").get<int>();
  fs::create_directories(c.out / "images");
  std::string log;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto raw = image::load_image(inputs[i]);
    const auto real = image::normalize(raw, norm);
    const auto e = models::enhance(loaded.network, image::UnitImage(real.width, real.height, real.values));
    char name[32];
    std::snprintf(name, sizeof name, "%05zu_", i);
    const auto out = c.out / "images" / (name + inputs[i].stem().string() + ".pgm");
    image::save_image(e.image, out, bits);
    log += json{{"image", inputs[i].string()}, {"output", out.string()}, {"alphas", alphas_json(e.coefficients)}}.dump() +
           "\n";
  }
  write_text_file(c.out / "alphas.jsonl", log);
  return {{"images", inputs.size()}, {"alpha_log", (c.out / "alphas.jsonl").string()}};
}

json cmd_curve(const Context& c) {
  const auto mode = str(c.cfg, "mode");
  if (mode == "apply") {
    const auto path = required_path(c.cfg, "image", "input image");
    const auto coeffs = curve::CurveCoefficients(c.cfg.at("alphas").get<std::vector<double>>());
    const auto real = image::normalize(image::load_image(path), image::parse_normalization(str(c.cfg, "normalization")));
    const auto out = curve::apply_curve(image::UnitImage(real.width, real.height, real.values), coeffs);
    const auto dst = c.out / (path.stem().string() + ".pgm");
    image::save_image(out, dst, c.cfg.at("bit_depth").get<int>());
    return {{"output", dst.string()}};
  }
  if (mode == "fit") {
    const double gamma = c.cfg.at("gamma").get<double>();
    const int grid = c.cfg.at("grid").get<int>();
    if (!(gamma > 0.0)) throw UsageError("gamma must be positive");
    if (grid < 2) throw UsageError("grid needs at least 2 points");
    std::vector<double> target(static_cast<std::size_t>(grid));
    for (int i = 0; i < grid; ++i) target[static_cast<std::size_t>(i)] = std::pow(double(i) / (grid - 1), gamma);
    const auto fit = curve::fit_curve_to_target(target, c.cfg.at("iterations").get<int>());
    json j = {{"gamma", gamma}, {"alphas", alphas_json(fit.coefficients)}, {"max_error", fit.max_error},
              {"sweeps", fit.sweeps}};
    write_text_file(c.out / "fit.json", j.dump(2) + "\n");
    return j;
  }
  throw UsageError("curve mode must be 'apply' or 'fit'");
}

json cmd_eval(const Context& c) {
  auto loaded = nn::load_checkpoint(required_path(c.cfg, "classifier", "classifier checkpoint"),
                                    models::kDiscriminatorRole);
  loaded.network.set_frozen(true);
  const auto names = meta_names(loaded.meta);
  const auto norm_name = str(c.cfg, "normalization");
  const auto norm = norm_name.empty() ? meta_normalization(loaded.meta) : image::parse_normalization(norm_name);
  const auto set = load_set(required_path(c.cfg, "manifest", "manifest to evaluate"), norm);
  if (set.class_names != names) throw DataError("manifest classes differ from the classifier's");
  std::optional<nn::Network<float>> gdce;
  if (!str(c.cfg, "gdce").empty()) {
    gdce = nn::load_checkpoint(str(c.cfg, "gdce"), models::kGdceRole).network;
    gdce->set_frozen(true);
  }
  const auto report = train::evaluate_set(loaded.network, set, gdce ? &*gdce : nullptr);
  write_report(c.out, "report", report, names,
               {{"normalization", image::to_string(norm)}, {"enhanced", gdce.has_value()}});
  return report.to_json(names);
}

// ---- studies -------------------------------------------------------------

json cmd_ablate(const Context& c) {
  auto s = gdce_setup(c.cfg, "train_manifest", "shifted-domain training manifest");
  const auto test = load_set(required_path(c.cfg, "test_manifest", "shifted-domain test manifest"), s.norm);
  const auto base = train_config(c.cfg);
  auto [tr, val] = train::split_fold(s.shifted, base.val_fold);
  const auto grid = train::ablation_grid(
      c.cfg.at("layers").get<std::vector<int>>(), c.cfg.at("iterations").get<std::vector<int>>(), c.seed(),
      [&](int layers, int iters, std::uint64_t cell_seed) {
        json a = c.cfg.at("arch");
        a["layers"] = layers;
        a["iterations"] = iters;
        const auto arch = gdce_arch(a, s.shifted);
        auto tc = base;
        tc.seed = cell_seed;
        const auto dir = c.out / "cells" / ("L" + std::to_string(layers) + "_N" + std::to_string(iters));
        fs::create_directories(dir);
        auto r = train::train_gdce(tr, val, s.pool, s.disc, s.ext, arch, tc, {},
                                   log_sink(c, dir / kLogFile, s.class_names,
                                            "ablate L=" + std::to_string(layers) + " N=" + std::to_string(iters)));
        const auto rep = train::evaluate_set(s.disc, test, &r.best);
        write_report(dir, "test_report", rep, s.class_names);
        train::AblationCell cell;
        cell.val_worst_group = r.best_metric;
        cell.test_worst_group = rep.worst_group_accuracy;
        return cell;
      });
  write_text_file(c.out / "grid.json", grid.to_json().dump(2) + "\n");
  write_text_file(c.out / "grid.txt", grid.to_text());
  return grid.to_json();
}

json cmd_gradcheck(const Context& c) {
  GradCheckOptions o;
  o.seed = c.seed();
  o.tolerance = c.cfg.at("tolerance").get<double>();
  o.curve_tolerance = c.cfg.at("curve_tolerance").get<double>();
  o.samples_per_param = c.cfg.at("samples_per_param").get<int>();
  if (!(o.tolerance > 0.0) || !(o.curve_tolerance > 0.0) || o.samples_per_param < 1) {
    throw UsageError("gradcheck tolerances and sample counts must be positive");
  }
  const auto entries = run_gradcheck(o);
  const json j = to_json(entries);
  write_text_file(c.out / "gradcheck.json", j.dump(2) + "\n");
  for (const auto& e : entries) {
    if (!e.passed()) {
      std::ostringstream os;
      os << "gradient check failed for " << e.op << ": max relative error " << e.max_rel_error << " >= "
         << e.tolerance;
      throw NumericalError(os.str());
    }
  }
  return j;
}

json cmd_crossval(const Context& c) {
  const auto target = str(c.cfg, "target");
  const int folds = c.cfg.at("folds").get<int>();
  json tcfg = c.cfg;
  tcfg["stop_after_epoch"] = nullptr;
  const auto base = train_config(tcfg);
  const auto manifest = required_path(c.cfg, "manifest", "manifest whose folds are rotated");

  train::SampleSet all;
  std::optional<GdceSetup> setup;
  if (target == "clf") {
    all = load_set(manifest, image::parse_normalization(str(c.cfg, "normalization")));
  } else if (target == "gdce") {
    setup = gdce_setup(c.cfg, "manifest", "manifest whose folds are rotated");
    all = setup->shifted;
  } else {
    throw UsageError("crossval target must be 'clf' or 'gdce'");
  }
  std::vector<int> fold_ids;
  for (const auto& smp : all.samples) fold_ids.push_back(smp.fold);

  auto run_fold = [&](int k) {
    const int vk = (k + 1) % folds;
    const auto test = all.filter([k](const train::Sample& s) { return s.fold == k; });
    const auto val = all.filter([vk](const train::Sample& s) { return s.fold == vk; });
    const auto tr = all.filter([k, vk](const train::Sample& s) { return s.fold != k && s.fold != vk; });
    auto tc = base;
    tc.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(k)});
    tc.val_fold = vk;
    const auto dir = c.out / ("fold" + std::to_string(k));
    fs::create_directories(dir);
    const auto sink = log_sink(c, dir / kLogFile, all.class_names, "crossval fold " + std::to_string(k));
    eval::MetricsReport rep;
    if (setup) {
      const auto arch = gdce_arch(c.cfg.at("gdce_arch"), all);
      auto r = train::train_gdce(tr, val, setup->pool, setup->disc, setup->ext, arch, tc, {}, sink);
      rep = train::evaluate_set(setup->disc, test, &r.best);
    } else {
      auto r = train::train_discriminator(tr, val, clf_arch(c.cfg, all.num_classes()), tc, {}, sink);
      rep = train::evaluate_set(r.best, test);
    }
    write_report(dir, "test_report", rep, all.class_names);
    return rep;
  };
  const auto result = train::crossval_run(fold_ids, folds, run_fold);
  json j;
  j["folds"] = json::array();
  for (const auto& r : result.folds) j["folds"].push_back(r.to_json(all.class_names));
  j["mean"] = result.mean;
  write_text_file(c.out / "crossval.json", j.dump(2) + "\n");
  return j;
}

}  // namespace

json run(const std::string& command, const json& config, const fs::path& out_dir, const RunFlags& flags,
         const ProgressFn& progress) {
  // Re-validate: callers may hand over a hand-built configuration.
  json cfg = default_config(command);
  merge_config(cfg, config);
  Context c{command, cfg, out_dir, flags, progress};
  prepare_out_dir(c);
  try {
    if (command == "gen-data") return cmd_gen_data(c);
    if (command == "shift") return cmd_shift(c);
    if (command == "train-clf") return cmd_train_clf(c);
    if (command == "train-gdce") return cmd_train_gdce(c);
    if (command == "apply") return cmd_apply(c);
    if (command == "curve") return cmd_curve(c);
    if (command == "eval") return cmd_eval(c);
    if (command == "ablate") return cmd_ablate(c);
    if (command == "gradcheck") return cmd_gradcheck(c);
    if (command == "crossval") return cmd_crossval(c);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad configuration value: ") + e.what());
  }
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace gdce::pipeline
