#include "train/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"
#include "curve/curve.hpp"
#include "nn/checkpoint.hpp"
#include "nn/loss.hpp"

namespace gdce::train {

using nlohmann::json;

namespace {

constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;  // "SHUFF"
constexpr std::uint64_t kStepTag = 0x53544550ULL;       // "STEP"
constexpr std::uint64_t kGdceInitTag = 0x47444345ULL;   // "GDCE"
constexpr std::uint64_t kClfInitTag = 0x434c46ULL;      // "CLF"
constexpr std::size_t kEvalChunk = 32;

json opt_vec(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (batch_size < 1) throw UsageError("batch size must be positive");
  if (epochs < 1) throw UsageError("epoch count must be positive");
  if (val_fold < 0 || val_fold >= image::kNumFolds) throw UsageError("validation fold must be in [0,5)");
  if (stop_after_epoch && *stop_after_epoch < 1) throw UsageError("stop_after_epoch must be >= 1");
}

json EpochRecord::to_json(const std::vector<std::string>& class_names) const {
  json j;
  j["epoch"] = epoch;
  j["loss"] = {{"ce", loss.ce}, {"perceptual", loss.perceptual}, {"total", loss.total}};
  j["val_per_class"] = opt_vec(val_per_class);
  j["val_worst_group"] = val_worst_group;
  j["val_accuracy"] = val_accuracy;
  json absent = json::array();
  for (std::size_t k = 0; k < val_per_class.size(); ++k) {
    if (!val_per_class[k]) absent.push_back(k < class_names.size() ? class_names[k] : std::to_string(k));
  }
  j["absent_groups"] = absent;
  return j;
}

EpochRecord EpochRecord::from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.loss.ce = j.at("loss").at("ce").get<double>();
  r.loss.perceptual = j.at("loss").at("perceptual").get<double>();
  r.loss.total = j.at("loss").at("total").get<double>();
  for (const auto& v : j.at("val_per_class")) {
    r.val_per_class.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  r.val_worst_group = j.at("val_worst_group").get<double>();
  r.val_accuracy = j.at("val_accuracy").get<double>();
  return r;
}

// ---- shared epoch loop ---------------------------------------------------

namespace {

struct LoopHooks {
  // Accumulates gradients of the batch-mean loss into the network.
  std::function<LossTerms(std::span<const std::size_t>, std::uint64_t)> batch;
  std::function<eval::MetricsReport()> validate;
};

std::vector<nn::Blob> state_blobs(const nn::Network<float>& net, const nn::Adam<float>& adam,
                                  const nn::Network<float>& best) {
  std::vector<nn::Blob> blobs;
  const auto params = net.params();
  const auto best_params = best.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i]->shape;
    const auto& m = adam.first_moments();
    const auto& v = adam.second_moments();
    blobs.push_back({"adam.m." + std::to_string(i), shape, m.empty() ? std::vector<float>(params[i]->value.size(), 0.0f) : m[i]});
    blobs.push_back({"adam.v." + std::to_string(i), shape, v.empty() ? std::vector<float>(params[i]->value.size(), 0.0f) : v[i]});
    const auto& bv = best_params[i]->value;
    blobs.push_back({"best." + std::to_string(i), shape, std::vector<float>(bv.begin(), bv.end())});
  }
  return blobs;
}

TrainResult run_epochs(nn::Network<float>& net, std::size_t n_train, const TrainConfig& cfg, const LoopHooks& hooks,
                       const std::vector<std::string>& class_names,
                       const std::optional<std::filesystem::path>& state_path, const EpochSink& sink) {
  nn::Adam<float> adam(nn::AdamOptions{cfg.lr, 0.9, 0.999, 1e-8});
  TrainResult result;
  result.best = net;
  result.best_metric = -1.0;
  int start_epoch = 0;

  if (state_path && std::filesystem::exists(*state_path)) {
    auto st = nn::load_checkpoint(*state_path, net.role());
    if (st.network.descriptor() != net.descriptor()) {
      throw DataError("training state " + state_path->string() + " was written for a different architecture");
    }
    const bool was_frozen = net.frozen();
    net = std::move(st.network);
    net.set_frozen(was_frozen);
    const auto params = net.params();
    std::vector<std::vector<float>> m, v;
    auto best_params = result.best.params();
    if (st.extra.size() != params.size() * 3) throw DataError("training state has inconsistent optimizer blobs");
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.push_back(st.extra[3 * i].data);
      v.push_back(st.extra[3 * i + 1].data);
      const auto& bv = st.extra[3 * i + 2].data;
      best_params[i]->value.assign(bv.begin(), bv.end());
    }
    adam.restore(st.meta.at("adam_step").get<std::int64_t>(), std::move(m), std::move(v));
    start_epoch = st.meta.at("epochs_done").get<int>();
    result.best_epoch = st.meta.at("best_epoch").get<int>();
    result.best_metric = st.meta.at("best_metric").get<double>();
    for (const auto& r : st.meta.at("log")) result.log.push_back(EpochRecord::from_json(r));
  }

  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n_train);
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng(derive_seed(cfg.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)})).shuffle(order.begin(), order.end());
    LossTerms sum;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n_train; b0 += bs) {
      const std::size_t b1 = std::min(n_train, b0 + bs);
      net.zero_grad();
      const auto step_seed = derive_seed(cfg.seed, {kStepTag, static_cast<std::uint64_t>(epoch), b0});
      const LossTerms t = hooks.batch(std::span<const std::size_t>(order.data() + b0, b1 - b0), step_seed);
      if (!std::isfinite(t.total)) {
        std::ostringstream os;
        os << "training diverged: non-finite loss at epoch " << epoch + 1 << ", batch " << batches
           << " (ce=" << t.ce << ", perceptual=" << t.perceptual << ")";
        throw NumericalError(os.str());
      }
      adam.step(net);
      sum.ce += t.ce;
      sum.perceptual += t.perceptual;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss.ce = sum.ce / static_cast<double>(batches);
    rec.loss.perceptual = sum.perceptual / static_cast<double>(batches);
    rec.loss.total = rec.loss.ce + rec.loss.perceptual;
    const auto report = hooks.validate();
    rec.val_per_class = report.per_class_accuracy;
    rec.val_worst_group = report.worst_group_accuracy;
    rec.val_accuracy = report.accuracy;
    result.log.push_back(rec);
    if (rec.val_worst_group > result.best_metric) {
      result.best_metric = rec.val_worst_group;
      result.best_epoch = rec.epoch;
      result.best = net;
    }
    if (state_path) {
      json meta;
      meta["epochs_done"] = epoch + 1;
      meta["best_epoch"] = result.best_epoch;
      meta["best_metric"] = result.best_metric;
      meta["adam_step"] = adam.steps();
      meta["log"] = json::array();
      for (const auto& r : result.log) meta["log"].push_back(r.to_json(class_names));
      nn::save_checkpoint(net, *state_path, meta, state_blobs(net, adam, result.best));
    }
    if (sink) sink(result.log);
    if (cfg.stop_after_epoch && epoch + 1 >= *cfg.stop_after_epoch && epoch + 1 < cfg.epochs) {
      result.interrupted = true;
      break;
    }
  }
  return result;
}

nn::Tensor<float> gather(const SampleSet& set, std::span<const std::size_t> idx) {
  std::vector<const image::RealImage*> imgs;
  imgs.reserve(idx.size());
  for (auto i : idx) imgs.push_back(&set.samples[i].input);
  return models::to_tensor<float>(imgs);
}

}  // namespace

// ---- classifier ----------------------------------------------------------

TrainResult train_discriminator(const SampleSet& train, const SampleSet& val, const models::DiscriminatorConfig& arch,
                                const TrainConfig& cfg, const std::optional<std::filesystem::path>& state_path,
                                const EpochSink& sink) {
  cfg.validate();
  if (train.samples.empty()) throw DataError("classifier training set is empty");
  {
    std::vector<int> labels = train.labels();
    std::sort(labels.begin(), labels.end());
    if (std::unique(labels.begin(), labels.end()) - labels.begin() < 2) {
      throw DataError("classifier training needs at least 2 classes present");
    }
  }
  if (arch.classes != train.num_classes()) throw UsageError("classifier class count does not match the manifest");
  auto net = models::make_discriminator<float>(arch, derive_seed(cfg.seed, {kClfInitTag}));
  LoopHooks hooks;
  hooks.batch = [&](std::span<const std::size_t> idx, std::uint64_t) {
    const auto x = gather(train, idx);
    const auto logits = net.forward(x);
    const int c = logits.shape.c;
    nn::Tensor<float> dlogits(logits.shape);
    const float inv_b = 1.0f / static_cast<float>(idx.size());
    double ce = 0.0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto r = nn::softmax_cross_entropy<float>(
          std::span<const float>(logits.sample(static_cast<int>(b)), static_cast<std::size_t>(c)),
          train.samples[idx[b]].label);
      ce += r.loss;
      for (int k = 0; k < c; ++k) dlogits.sample(static_cast<int>(b))[k] = r.grad[static_cast<std::size_t>(k)] * inv_b;
    }
    net.backward(dlogits);
    LossTerms t;
    t.ce = ce / static_cast<double>(idx.size());
    t.total = t.ce;
    return t;
  };
  hooks.validate = [&] {
    net.set_frozen(true);
    auto r = evaluate_set(net, val);
    net.set_frozen(false);
    return r;
  };
  auto result = run_epochs(net, train.size(), cfg, hooks, train.class_names, state_path, sink);
  result.best.set_frozen(true);
  return result;
}

// ---- enhancer ------------------------------------------------------------

void ReferencePool::validate() const {
  if (images.empty()) throw DataError("reference pool is empty");
}

nn::Tensor<float> sample_references(const ReferencePool& pool, std::size_t count, std::uint64_t seed) {
  pool.validate();
  Rng rng(seed);
  std::vector<const image::RealImage*> picks;
  for (std::size_t i = 0; i < count; ++i) picks.push_back(&pool.images[rng.below(pool.images.size())]);
  return models::to_tensor<float>(picks);
}

template <typename T>
LossTerms gdce_loss(const nn::Tensor<T>& inputs, std::span<const int> labels, nn::Network<T>& gdce,
                    nn::Network<T>& discriminator, nn::Network<T>& extractor, const nn::Tensor<T>& references,
                    bool perceptual_sum) {
  if (!discriminator.frozen()) throw UsageError("discriminator must be frozen during enhancer training");
  if (!extractor.frozen()) throw UsageError("perceptual extractor must be frozen during enhancer training");
  if (gdce.frozen()) throw UsageError("enhancer is frozen");
  if (references.shape != inputs.shape) throw DataError("reference batch shape differs from input batch");
  const int batch = inputs.shape.n;
  if (labels.size() != static_cast<std::size_t>(batch)) throw DataError("label count differs from batch size");
  const std::size_t plane = inputs.shape.per_sample();

  const auto alpha = gdce.forward(inputs);
  const auto n_iter = static_cast<std::size_t>(alpha.shape.c);
  nn::Tensor<T> enhanced(inputs.shape);
  for (int b = 0; b < batch; ++b) {
    curve::curve_forward<T>(std::span<const T>(inputs.sample(b), plane), std::span<const T>(alpha.sample(b), n_iter),
                            std::span<T>(enhanced.sample(b), plane));
  }

  // Classification term through the frozen classifier.
  const auto logits = discriminator.forward(enhanced);
  const auto classes = static_cast<std::size_t>(logits.shape.c);
  nn::Tensor<T> dlogits(logits.shape);
  const T inv_b = T(1) / static_cast<T>(batch);
  double ce = 0.0;
  for (int b = 0; b < batch; ++b) {
    const auto r = nn::softmax_cross_entropy<T>(std::span<const T>(logits.sample(b), classes),
                                                labels[static_cast<std::size_t>(b)]);
    ce += static_cast<double>(r.loss);
    for (std::size_t k = 0; k < classes; ++k) dlogits.sample(b)[k] = r.grad[k] * inv_b;
  }
  auto d_enhanced = discriminator.backward(dlogits);

  // Appearance term: L1 between tap activations of the output and a reference.
  const std::size_t depth = models::perceptual_tap_depth(extractor.descriptor());
  const auto ref_feat = extractor.forward(references, depth);
  const auto out_feat = extractor.forward(enhanced, depth);
  const std::size_t count = out_feat.shape.per_sample();
  const T scale = perceptual_sum ? inv_b : inv_b / static_cast<T>(count);
  nn::Tensor<T> dfeat(out_feat.shape);
  double perceptual = 0.0;
  for (std::size_t i = 0; i < out_feat.size(); ++i) {
    const T d = out_feat.data[i] - ref_feat.data[i];
    perceptual += std::abs(static_cast<double>(d));
    dfeat.data[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  perceptual /= static_cast<double>(batch);
  if (!perceptual_sum) perceptual /= static_cast<double>(count);
  const auto d_perc = extractor.backward(dfeat);
  for (std::size_t i = 0; i < d_enhanced.size(); ++i) d_enhanced.data[i] += d_perc.data[i];

  // Through the curve into the coefficients, then into the enhancer.
  nn::Tensor<T> dalpha(alpha.shape);
  for (int b = 0; b < batch; ++b) {
    curve::curve_backward<T>(std::span<const T>(inputs.sample(b), plane), std::span<const T>(alpha.sample(b), n_iter),
                             std::span<const T>(d_enhanced.sample(b), plane), std::span<T>(dalpha.sample(b), n_iter));
  }
  gdce.backward(dalpha);

  LossTerms t;
  t.ce = ce / static_cast<double>(batch);
  t.perceptual = perceptual;
  t.total = t.ce + t.perceptual;
  return t;
}

template LossTerms gdce_loss<float>(const nn::Tensor<float>&, std::span<const int>, nn::Network<float>&,
                                    nn::Network<float>&, nn::Network<float>&, const nn::Tensor<float>&, bool);
template LossTerms gdce_loss<double>(const nn::Tensor<double>&, std::span<const int>, nn::Network<double>&,
                                     nn::Network<double>&, nn::Network<double>&, const nn::Tensor<double>&, bool);

TrainResult train_gdce(const SampleSet& train, const SampleSet& val, const ReferencePool& refs,
                       nn::Network<float>& discriminator, nn::Network<float>& extractor,
                       const models::GdceConfig& arch, const TrainConfig& cfg,
                       const std::optional<std::filesystem::path>& state_path, const EpochSink& sink) {
  cfg.validate();
  refs.validate();
  if (!discriminator.frozen()) throw UsageError("discriminator must be frozen during enhancer training");
  if (!extractor.frozen()) throw UsageError("perceptual extractor must be frozen during enhancer training");
  if (train.samples.empty()) throw DataError("enhancer training set is empty");
  const auto& first = train.samples.front().input;
  for (const auto& r : refs.images) {
    if (r.width != first.width || r.height != first.height) throw DataError("reference images differ in size from training images");
  }
  for (const auto& s : train.samples) {
    for (double v : s.input.values) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("enhancer inputs must be unit-interval images");
    }
  }
  const std::string disc_sum = discriminator.checksum();
  const std::string ext_sum = extractor.checksum();

  auto net = models::make_gdce<float>(arch, derive_seed(cfg.seed, {kGdceInitTag}));
  LoopHooks hooks;
  hooks.batch = [&](std::span<const std::size_t> idx, std::uint64_t step_seed) {
    const auto x = gather(train, idx);
    std::vector<int> labels;
    for (auto i : idx) labels.push_back(train.samples[i].label);
    const auto r = sample_references(refs, idx.size(), step_seed);
    return gdce_loss<float>(x, labels, net, discriminator, extractor, r, cfg.perceptual_sum);
  };
  hooks.validate = [&] { return evaluate_set(discriminator, val, &net); };
  auto result = run_epochs(net, train.size(), cfg, hooks, train.class_names, state_path, sink);
  if (discriminator.checksum() != disc_sum || extractor.checksum() != ext_sum) {
    throw NumericalError("frozen network weights changed during enhancer training");
  }
  return result;
}

// ---- evaluation ----------------------------------------------------------

std::vector<double> predict_probs(nn::Network<float>& discriminator, const SampleSet& set, nn::Network<float>* gdce) {
  std::vector<double> probs;
  probs.reserve(set.size() * static_cast<std::size_t>(set.num_classes()));
  for (std::size_t c0 = 0; c0 < set.size(); c0 += kEvalChunk) {
    const std::size_t c1 = std::min(set.size(), c0 + kEvalChunk);
    std::vector<image::RealImage> enhanced;
    std::vector<const image::RealImage*> ptrs;
    for (std::size_t i = c0; i < c1; ++i) {
      const auto& in = set.samples[i].input;
      if (gdce) {
        image::UnitImage u(in.width, in.height, in.values);
        auto e = models::enhance(*gdce, u);
        enhanced.push_back({in.width, in.height, e.image.values()});
      }
    }
    for (std::size_t i = c0; i < c1; ++i) ptrs.push_back(gdce ? &enhanced[i - c0] : &set.samples[i].input);
    const auto logits = models::discriminate(discriminator, models::to_tensor<float>(ptrs));
    const auto c = static_cast<std::size_t>(set.num_classes());
    if (logits.size() != ptrs.size() * c) throw DataError("classifier output size does not match class count");
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      std::vector<double> row(logits.begin() + static_cast<std::ptrdiff_t>(b * c),
                              logits.begin() + static_cast<std::ptrdiff_t>((b + 1) * c));
      const auto p = nn::softmax<double>(row);
      probs.insert(probs.end(), p.begin(), p.end());
    }
  }
  return probs;
}

eval::MetricsReport evaluate_set(nn::Network<float>& discriminator, const SampleSet& set, nn::Network<float>* gdce) {
  const auto probs = predict_probs(discriminator, set, gdce);
  const auto labels = set.labels();
  return eval::evaluate(probs, labels, set.num_classes());
}

// ---- orchestration -------------------------------------------------------

CrossValResult crossval_run(std::span<const int> fold_ids, int folds,
                            const std::function<eval::MetricsReport(int)>& run_fold) {
  if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  std::vector<long> count(static_cast<std::size_t>(folds), 0);
  for (int f : fold_ids) {
    if (f < 0 || f >= folds) throw DataError("fold id " + std::to_string(f) + " outside [0," + std::to_string(folds) + ")");
    ++count[static_cast<std::size_t>(f)];
  }
  for (int k = 0; k < folds; ++k) {
    if (count[static_cast<std::size_t>(k)] == 0) throw DataError("fold " + std::to_string(k) + " is missing");
  }
  CrossValResult out;
  for (int k = 0; k < folds; ++k) out.folds.push_back(run_fold(k));
  out.mean = eval::mean_report(out.folds);
  return out;
}

AblationGrid ablation_grid(const std::vector<int>& layers, const std::vector<int>& iterations, std::uint64_t seed,
                           const std::function<AblationCell(int, int, std::uint64_t)>& run_cell) {
  if (layers.empty() || iterations.empty()) throw UsageError("ablation grid axes must be non-empty");
  AblationGrid g{layers, iterations, {}};
  for (int l : layers) {
    for (int n : iterations) {
      const auto cell_seed = derive_seed(seed, {static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(n)});
      AblationCell c = run_cell(l, n, cell_seed);
      c.layers = l;
      c.iterations = n;
      g.cells.push_back(c);
    }
  }
  return g;
}

json AblationGrid::to_json() const {
  json j;
  j["layers"] = layers;
  j["iterations"] = iterations;
  j["validation"] = json::array();
  j["test"] = json::array();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    json v = json::array(), t = json::array();
    for (std::size_t ni = 0; ni < iterations.size(); ++ni) {
      v.push_back(at(li, ni).val_worst_group);
      t.push_back(at(li, ni).test_worst_group);
    }
    j["validation"].push_back(v);
    j["test"].push_back(t);
  }
  return j;
}

std::string AblationGrid::to_text() const {
  std::ostringstream os;
  char buf[64];
  for (const bool test : {false, true}) {
    os << (test ? "test" : "validation") << " worst-group accuracy (rows: conv layers, cols: iterations)\n";
    os << "L\\N  ";
    for (int n : iterations) {
      std::snprintf(buf, sizeof buf, "%8d", n);
      os << buf;
    }
    os << "\n";
    for (std::size_t li = 0; li < layers.size(); ++li) {
      std::snprintf(buf, sizeof buf, "%-5d", layers[li]);
      os << buf;
      for (std::size_t ni = 0; ni < iterations.size(); ++ni) {
        const auto& c = at(li, ni);
        std::snprintf(buf, sizeof buf, "%8.4f", test ? c.test_worst_group : c.val_worst_group);
        os << buf;
      }
      os << "\n";
    }
    if (!test) os << "\n";
  }
  return os.str();
}

}  // namespace gdce::train
