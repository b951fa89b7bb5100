#include "train/dataset.hpp"

#include "common/error.hpp"

namespace gdce::train {

std::vector<int> SampleSet::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

SampleSet SampleSet::filter(const std::function<bool(const Sample&)>& keep) const {
  SampleSet out{class_names, {}};
  for (const auto& s : samples) {
    if (keep(s)) out.samples.push_back(s);
  }
  return out;
}

SampleSet load_samples(const image::DatasetManifest& m, image::Normalization norm) {
  m.validate();
  SampleSet out{m.class_names, {}};
  out.samples.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    const auto raw = image::load_image(m.resolve(e));
    out.samples.push_back({image::normalize(raw, norm), e.label, e.fold});
  }
  const auto& first = out.samples.front().input;
  for (const auto& s : out.samples) {
    if (s.input.width != first.width || s.input.height != first.height) {
      throw DataError("all images in a manifest must share one size");
    }
  }
  return out;
}

std::pair<SampleSet, SampleSet> split_fold(const SampleSet& s, int fold) {
  if (fold < 0 || fold >= image::kNumFolds) throw UsageError("validation fold must be in [0,5)");
  auto train = s.filter([fold](const Sample& x) { return x.fold != fold; });
  auto val = s.filter([fold](const Sample& x) { return x.fold == fold; });
  if (train.samples.empty()) throw DataError("no training samples outside fold " + std::to_string(fold));
  if (val.samples.empty()) throw DataError("validation fold " + std::to_string(fold) + " is empty");
  return {std::move(train), std::move(val)};
}

}  // namespace gdce::train
