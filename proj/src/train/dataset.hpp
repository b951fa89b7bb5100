#pragma once

#include <functional>
#include <string>
#include <vector>

#include "image/image.hpp"

namespace gdce::train {

struct Sample {
  image::RealImage input;
  int label = 0;
  int fold = 0;
};

struct SampleSet {
  std::vector<std::string> class_names;
  std::vector<Sample> samples;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t size() const { return samples.size(); }
  std::vector<int> labels() const;
  SampleSet filter(const std::function<bool(const Sample&)>& keep) const;
};

// Loads and normalizes every manifest entry.
SampleSet load_samples(const image::DatasetManifest& m, image::Normalization norm);

// Splits off `fold` as validation.
std::pair<SampleSet, SampleSet> split_fold(const SampleSet& s, int fold);

}  // namespace gdce::train
