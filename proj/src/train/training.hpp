#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eval/metrics.hpp"
#include "models/models.hpp"
#include "nn/adam.hpp"
#include "nn/network.hpp"
#include "train/dataset.hpp"

namespace gdce::train {

struct LossTerms {
  double ce = 0.0;
  double perceptual = 0.0;
  double total = 0.0;  // ce + perceptual, unweighted
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 12;
  int epochs = 50;
  std::uint64_t seed = 0;
  int val_fold = 0;
  bool perceptual_sum = false;           // sum instead of mean reduction
  std::optional<int> stop_after_epoch;  // simulate an interruption (1-based)

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossTerms loss;
  std::vector<std::optional<double>> val_per_class;
  double val_worst_group = 0.0;
  double val_accuracy = 0.0;

  nlohmann::json to_json(const std::vector<std::string>& class_names) const;
  static EpochRecord from_json(const nlohmann::json& j);
};

struct TrainResult {
  nn::Network<float> best;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_metric = 0.0;
  bool interrupted = false;
};

// Called after every epoch with the full log so far (resumed epochs included).
using EpochSink = std::function<void(const std::vector<EpochRecord>&)>;

// Softmax cross-entropy classifier training on `train`, model selection by
// worst-group accuracy on `val`. With `state_path` set, progress is saved
// after every epoch and an existing state is resumed.
TrainResult train_discriminator(const SampleSet& train, const SampleSet& val, const models::DiscriminatorConfig& arch,
                                const TrainConfig& cfg, const std::optional<std::filesystem::path>& state_path = {},
                                const EpochSink& sink = {});

// Images available as the appearance reference.
struct ReferencePool {
  std::vector<image::RealImage> images;
  void validate() const;
};

// Composite loss for one batch of shifted inputs in [0,1]. Gradients are
// accumulated into `gdce` only; both auxiliary networks must be frozen.
// `references` holds one reference image per batch item (same shape as
// `inputs`). Loss values are batch means.
template <typename T>
LossTerms gdce_loss(const nn::Tensor<T>& inputs, std::span<const int> labels, nn::Network<T>& gdce,
                    nn::Network<T>& discriminator, nn::Network<T>& extractor, const nn::Tensor<T>& references,
                    bool perceptual_sum = false);

// Draws one reference per item uniformly from the pool.
nn::Tensor<float> sample_references(const ReferencePool& pool, std::size_t count, std::uint64_t seed);

// Adam training of the enhancer against the frozen classifier; validation is
// worst-group accuracy of the classifier on enhanced `val` images.
TrainResult train_gdce(const SampleSet& train, const SampleSet& val, const ReferencePool& refs,
                       nn::Network<float>& discriminator, nn::Network<float>& extractor,
                       const models::GdceConfig& arch, const TrainConfig& cfg,
                       const std::optional<std::filesystem::path>& state_path = {}, const EpochSink& sink = {});

// Class probabilities, row-major [sample][class]. With `gdce`, each input is
// enhanced first (inputs must then lie in [0,1]).
std::vector<double> predict_probs(nn::Network<float>& discriminator, const SampleSet& set,
                                  nn::Network<float>* gdce = nullptr);

eval::MetricsReport evaluate_set(nn::Network<float>& discriminator, const SampleSet& set,
                                 nn::Network<float>* gdce = nullptr);

struct CrossValResult {
  std::vector<eval::MetricsReport> folds;
  nlohmann::json mean;
};

// Runs `run_fold(k)` for k = 0..folds-1 and averages the reports. Every fold
// id present in `fold_ids` must lie below `folds`, and every fold must be
// non-empty.
CrossValResult crossval_run(std::span<const int> fold_ids, int folds,
                            const std::function<eval::MetricsReport(int)>& run_fold);

struct AblationCell {
  int layers = 0;
  int iterations = 0;
  double val_worst_group = 0.0;
  double test_worst_group = 0.0;
};

struct AblationGrid {
  std::vector<int> layers;
  std::vector<int> iterations;
  std::vector<AblationCell> cells;  // row-major [layers][iterations]

  const AblationCell& at(std::size_t li, std::size_t ni) const { return cells[li * iterations.size() + ni]; }
  nlohmann::json to_json() const;
  // Plain-text heat-map tables (validation, then test).
  std::string to_text() const;
};

// Evaluates `run_cell(L, N, cell_seed)` for every grid point; the seed
// depends only on (L, N), so cells are independent of execution order.
AblationGrid ablation_grid(const std::vector<int>& layers, const std::vector<int>& iterations, std::uint64_t seed,
                           const std::function<AblationCell(int, int, std::uint64_t)>& run_cell);

}  // namespace gdce::train
