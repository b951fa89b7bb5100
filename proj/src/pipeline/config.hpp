#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gdce::pipeline {

inline constexpr const char* kSeedEnv = "GDCE_SEED";

const std::vector<std::string>& command_names();

// Full default configuration of `command`; throws UsageError for unknown
// commands.
nlohmann::json default_config(const std::string& command);

// Recursively overlays `patch` onto `base`. Every key of `patch` must exist in
// `base` with a compatible type; a null default accepts anything.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

// "a.b.c=value"; the value is parsed as JSON when possible, else taken as a
// string.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

// defaults <- $GDCE_SEED <- file <- overrides <- explicit seed.
nlohmann::json resolve_config(const std::string& command, const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed);

std::uint64_t parse_seed(const std::string& text);

}  // namespace gdce::pipeline
