#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gdce::pipeline {

struct GradCheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  long checked = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double curve_tolerance = 1e-6;
  int samples_per_param = 24;
};

// Central finite differences in double precision for every differentiable
// op and for the composite enhancer loss. Relative error is
// |a - n| / max(|a|, |n|, 1e-4).
std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& opts);

nlohmann::json to_json(const std::vector<GradCheckEntry>& entries);

}  // namespace gdce::pipeline
