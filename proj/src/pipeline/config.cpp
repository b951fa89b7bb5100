#include "pipeline/config.hpp"

#include <cstdlib>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "models/models.hpp"
#include "synth/synthshift.hpp"

namespace gdce::pipeline {

using nlohmann::json;

namespace {

json without_seed(json j) {
  j.erase("seed");
  return j;
}

json train_common() {
  return {{"seed", 0},
          {"lr", 1e-4},
          {"batch_size", 12},
          {"epochs", 50},
          {"val_fold", 0},
          {"stop_after_epoch", nullptr}};
}

json clf_config() {
  json j = train_common();
  j["train_manifest"] = "";
  j["normalization"] = "full-range";
  j["arch"] = models::DiscriminatorConfig{}.to_json();
  j["arch"]["classes"] = nullptr;  // taken from the manifest
  return j;
}

json gdce_config() {
  json j = train_common();
  j["train_manifest"] = "";
  j["reference_manifest"] = "";
  j["classifier"] = "";
  j["perceptual_sum"] = false;
  j["drop_classes"] = json::array();
  j["arch"] = models::GdceConfig{}.to_json();
  j["perceptual"] = without_seed(models::PerceptualConfig{}.to_json());
  return j;
}

bool compatible(const json& a, const json& b) {
  if (a.is_null()) return true;
  if (a.is_number()) return b.is_number();
  return a.type() == b.type();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-data", "shift", "train-clf", "train-gdce", "apply", "curve",
                                                 "eval", "ablate", "gradcheck", "crossval"};
  return names;
}

json default_config(const std::string& command) {
  if (command == "gen-data") {
    synth::SynthSpec spec;
    spec.validate();
    json shift = without_seed(synth::ShiftProfile{}.to_json());
    return {{"seed", 1}, {"synth", without_seed(spec.to_json())}, {"shift", shift}, {"shifted_domain", false}};
  }
  if (command == "shift") {
    return {{"seed", 0},
            {"manifest", ""},
            {"scanner", "shifted"},
            {"profile", without_seed(synth::ShiftProfile{}.to_json())}};
  }
  if (command == "train-clf") return clf_config();
  if (command == "train-gdce") return gdce_config();
  if (command == "apply") {
    return {{"seed", 0}, {"gdce", ""}, {"images", json::array()}, {"manifest", ""}, {"bit_depth", 16}};
  }
  if (command == "curve") {
    return {{"seed", 0},
            {"mode", "apply"},
            {"image", ""},
            {"normalization", "full-range"},
            {"alphas", json::array()},
            {"bit_depth", 16},
            {"gamma", 0.5},
            {"iterations", 8},
            {"grid", 1024}};
  }
  if (command == "eval") {
    return {{"seed", 0}, {"classifier", ""}, {"manifest", ""}, {"gdce", ""}, {"normalization", ""}};
  }
  if (command == "ablate") {
    json j = gdce_config();
    j["layers"] = {2, 4};
    j["iterations"] = {8, 4};
    j["test_manifest"] = "";
    return j;
  }
  if (command == "gradcheck") {
    return {{"seed", 0}, {"tolerance", 1e-4}, {"curve_tolerance", 1e-6}, {"samples_per_param", 24}};
  }
  if (command == "crossval") {
    json j = clf_config();
    j["target"] = "clf";
    j["folds"] = 5;
    j["manifest"] = "";
    j.erase("train_manifest");
    j.erase("stop_after_epoch");
    j["test_manifest"] = "";
    j["reference_manifest"] = "";
    j["classifier"] = "";
    j["perceptual_sum"] = false;
    j["gdce_arch"] = models::GdceConfig{}.to_json();
    j["perceptual"] = without_seed(models::PerceptualConfig{}.to_json());
    return j;
  }
  throw UsageError("unknown command '" + command + "'");
}

void merge_config(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw UsageError("configuration" + (where.empty() ? "" : " '" + where + "'") + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw UsageError("unknown configuration key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object()) {
      merge_config(slot, it.value(), key);
    } else if (!compatible(slot, it.value()) && !it.value().is_null()) {
      throw UsageError("configuration key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                       it.value().type_name());
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::size_t end = path.size();
  while (true) {
    const auto dot = path.rfind('.', end - 1);
    const std::string part = path.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
    if (part.empty()) throw UsageError("override '" + assignment + "' has an empty key");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_config(cfg, patch);
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid seed '" + text + "'");
  }
}

json resolve_config(const std::string& command, const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
  json cfg = default_config(command);
  if (const char* env = std::getenv(kSeedEnv); env && *env) cfg["seed"] = parse_seed(env);
  if (file) {
    const json parsed = json::parse(read_text_file(*file), nullptr, false);
    if (parsed.is_discarded()) throw UsageError("config file " + file->string() + " is not valid JSON");
    merge_config(cfg, parsed);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

}  // namespace gdce::pipeline
