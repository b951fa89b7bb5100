#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <json.hpp>

// Subcommand drivers shared by the C API and the command-line tool. Every
// command writes only inside its output directory and dumps the effective
// configuration there as config.json.
namespace gdce::pipeline {

struct RunFlags {
  bool force = false;   // allow a non-empty output directory, start fresh
  bool resume = false;  // continue training from <out>/state.ckpt
};

using ProgressFn = std::function<void(const std::string&)>;

// `config` must be a resolved configuration (see resolve_config). Returns a
// summary object; throws gdce::Error subclasses on failure.
nlohmann::json run(const std::string& command, const nlohmann::json& config, const std::filesystem::path& out_dir,
                   const RunFlags& flags = {}, const ProgressFn& progress = {});

}  // namespace gdce::pipeline
