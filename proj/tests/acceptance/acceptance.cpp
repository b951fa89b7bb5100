// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common/fs.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"
#include "curve/curve.hpp"
#include "eval/metrics.hpp"
#include "models/models.hpp"
#include "nn/loss.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"
#include "support/gradients.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"
#include "train/training.hpp"

using namespace gdce;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kCurveCases = 10000;
constexpr double kCurveSeconds = 5.0;
// Criterion 2
constexpr double kGradTol = 1e-4;
constexpr double kCurveGradTol = 1e-6;
constexpr double kGradSeconds = 60.0;
// Criterion 3
constexpr int kFitIterations = 8;
constexpr int kFitGrid = 1024;
constexpr double kFitTol = 0.02;
constexpr double kFitSeconds = 30.0;
// Criterion 4
constexpr double kReferenceWorstGroup = 0.90;
constexpr double kRequiredDrop = 0.20;
constexpr double kRecoveryFraction = 0.85;
constexpr int kGdceEpochs = 30;
constexpr double kLoopSeconds = 30.0 * 60.0;
// Shift used for the closed loop: logistic S-curve (gain 2) then gamma 0.5,
// requantized to 12 bits.
constexpr double kShiftGamma = 0.5;
constexpr double kShiftGain = 2.0;
constexpr int kShiftBits = 12;
constexpr int kClassifierEpochs = 20;
constexpr double kClassifierLr = 1e-3;
constexpr std::uint64_t kSeed = 20240611;
// Criterion 5
constexpr int kAblationEpochs = 10;
// Criterion 6
constexpr int kMaxOracleSamples = 8;

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------- 1

void curve_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1);
  long bad = 0;
  constexpr int kPoints = 16;
  for (int c = 0; c < kCurveCases; ++c) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> alphas(static_cast<std::size_t>(n));
    for (auto& a : alphas) {
      // include the edges of the open interval
      const double u = rng.uniform();
      a = u < 0.05 ? std::nextafter(1.0, 0.0) : u < 0.1 ? std::nextafter(-1.0, 0.0) : rng.uniform(-1.0, 1.0);
      if (a == 0.0) a = 0.5;
    }
    std::vector<double> xs(kPoints);
    for (auto& x : xs) x = rng.uniform();
    std::sort(xs.begin(), xs.end());
    std::vector<double> ys(kPoints);
    curve::curve_forward<double>(xs, alphas, ys);
    for (int i = 0; i < kPoints; ++i) {
      if (!(ys[i] >= 0.0 && ys[i] <= 1.0)) ++bad;
      if (i > 0 && ys[i] < ys[i - 1]) ++bad;
    }
    if (curve::curve_value<double>(0.0, alphas) != 0.0) ++bad;
    if (curve::curve_value<double>(1.0, alphas) != 1.0) ++bad;
  }
  const double t = seconds_since(t0);
  report(1, "curve invariants", bad == 0 && t < kCurveSeconds,
         fmt("%d cases, %ld violations, %.2fs (limit %.0fs)", kCurveCases, bad, t, kCurveSeconds));
}

// ---------------------------------------------------------------- 2

double curve_fd_error() {
  Rng rng(2);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> alphas(static_cast<std::size_t>(n));
    for (auto& a : alphas) a = rng.uniform(-0.95, 0.95);
    std::vector<double> px(8);
    for (auto& x : px) x = rng.uniform(0.02, 0.98);
    const image::UnitImage img(8, 1, px);
    const curve::CurveCoefficients coef(alphas);
    const auto ga = curve::curve_grad_alpha(img, coef);
    const auto gx = curve::curve_grad_input(img, coef);

    for (std::size_t p = 0; p < px.size(); ++p) {
      std::vector<double> a = alphas;
      std::vector<double> g(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) g[k] = ga.at(p, k);
      const double x0 = px[p];
      worst = std::max(worst, oracle::max_fd_error(a, g, [&] { return curve::curve_value<double>(x0, a); }));
      std::vector<double> xv{x0};
      worst = std::max(worst, oracle::max_fd_error(xv, std::vector<double>{gx[p]},
                                                   [&] { return curve::curve_value<double>(xv[0], alphas); }));
    }
    // vector-Jacobian product against a weighted sum
    std::vector<double> up(px.size());
    for (auto& u : up) u = rng.uniform(-1, 1);
    std::vector<double> vjp(alphas.size(), 0.0);
    curve::curve_backward<double>(px, alphas, up, vjp);
    std::vector<double> a = alphas;
    worst = std::max(worst, oracle::max_fd_error(a, vjp, [&] {
      double s = 0.0;
      for (std::size_t p = 0; p < px.size(); ++p) s += up[p] * curve::curve_value<double>(px[p], a);
      return s;
    }));
  }
  return worst;
}

double softmax_ce_fd_error() {
  Rng rng(3);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    std::vector<double> z(2 + rng.below(5));
    for (auto& v : z) v = rng.uniform(-5, 5);
    const int label = static_cast<int>(rng.below(z.size()));
    const auto g = nn::softmax_cross_entropy<double>(z, label).grad;
    worst = std::max(worst, oracle::max_fd_error(z, g, [&] { return nn::softmax_cross_entropy<double>(z, label).loss; }));
  }
  return worst;
}

// Full enhancer objective (classifier CE + appearance L1) with respect to
// a sample of enhancer weights, both reductions.
double composite_fd_error() {
  models::GdceConfig gc;
  gc.layers = 2;
  gc.conv_channels = 4;
  gc.iterations = 4;
  gc.dense1 = 8;
  gc.dense2 = 8;
  gc.image_size = 16;
  models::DiscriminatorConfig dc;
  dc.classes = 3;
  dc.channels = {4, 4};
  dc.hidden = 8;
  auto gdce = models::make_gdce<double>(gc, 1);
  for (std::size_t i = 0; i < gdce.depth(); ++i) gdce.layer(i).init(10 + i);  // non-zero head
  auto disc = models::make_discriminator<double>(dc, 2);
  disc.set_frozen(true);
  auto ext = models::make_perceptual<double>(models::PerceptualConfig{});

  Rng rng(4);
  nn::Tensor<double> x(nn::Shape{3, 1, 16, 16}), refs(nn::Shape{3, 1, 16, 16});
  for (auto& v : x.data) v = rng.uniform(0.05, 0.95);
  for (auto& v : refs.data) v = rng.uniform(0.05, 0.95);
  const std::vector<int> labels{0, 2, 1};

  double worst = 0.0;
  for (bool sum : {false, true}) {
    gdce.zero_grad();
    train::gdce_loss<double>(x, labels, gdce, disc, ext, refs, sum);
    // every call accumulates into the gradient buffers, so snapshot first
    std::vector<std::vector<double>> grads;
    for (auto* p : gdce.params()) grads.emplace_back(p->grad.begin(), p->grad.end());
    auto f = [&] { return train::gdce_loss<double>(x, labels, gdce, disc, ext, refs, sum).total; };
    const auto params = gdce.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (int s = 0; s < 12; ++s) {
        const auto i = static_cast<std::size_t>(rng.below(params[k]->value.size()));
        // The loss is only piecewise smooth (L1 term, leaky units): a step
        // can straddle a kink, and in sum mode small entries drown in
        // roundoff. Take the best agreement over a short step ladder.
        double best = 1e300;
        for (double h : {1e-4, 1e-5, 1e-6, 1e-7}) {
          best = std::min(best, oracle::rel_error(grads[k][i], oracle::central_diff(params[k]->value, i, f, h)));
        }
        worst = std::max(worst, best);
      }
    }
  }
  return worst;
}

void gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Row {
    std::string op;
    double err, tol;
  };
  std::vector<Row> rows;
  rows.push_back({"conv3x3", oracle::layer_fd_error({{"kind", "conv3x3"}, {"in", 2}, {"out", 3}}, {2, 2, 5, 6}, 11), kGradTol});
  rows.push_back({"avgpool2x2", oracle::layer_fd_error({{"kind", "avgpool2x2"}}, {2, 2, 6, 5}, 12), kGradTol});
  rows.push_back({"adaptive-avgpool",
                  oracle::layer_fd_error({{"kind", "adaptive-avgpool"}, {"out_h", 3}, {"out_w", 3}}, {2, 2, 7, 8}, 13), kGradTol});
  rows.push_back({"dense", oracle::layer_fd_error({{"kind", "dense"}, {"in", 12}, {"out", 5}}, {3, 3, 2, 2}, 14), kGradTol});
  rows.push_back({"leaky-relu", oracle::layer_fd_error({{"kind", "leaky-relu"}, {"slope", 0.01}}, {2, 3, 4, 4}, 15), kGradTol});
  rows.push_back({"tanh", oracle::layer_fd_error({{"kind", "tanh"}}, {2, 3, 4, 4}, 16), kGradTol});
  rows.push_back({"softmax-ce", softmax_ce_fd_error(), kGradTol});
  rows.push_back({"curve", curve_fd_error(), kCurveGradTol});
  rows.push_back({"composite-loss", composite_fd_error(), kGradTol});
  const double t = seconds_since(t0);
  bool ok = t < kGradSeconds;
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.err < r.tol;
    detail += fmt("%s %.1e%s; ", r.op.c_str(), r.err, r.err < r.tol ? "" : " (over)");
  }
  report(2, "gradient suite", ok, detail + fmt("%.2fs (limit %.0fs)", t, kGradSeconds));
}

// ---------------------------------------------------------------- 3

void curve_expressivity() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (double gamma : {0.5, 0.75, 1.5, 2.0}) {
    std::vector<double> target(kFitGrid);
    for (int i = 0; i < kFitGrid; ++i) target[i] = std::pow(i / double(kFitGrid - 1), gamma);
    const auto fit = curve::fit_curve_to_target(target, kFitIterations);
    // measured here rather than trusting the fitter's own number
    double err = 0.0;
    for (int i = 0; i < kFitGrid; ++i) {
      err = std::max(err, std::abs(curve::curve_value<double>(i / double(kFitGrid - 1), fit.coefficients.alphas()) - target[i]));
    }
    ok = ok && err <= kFitTol;
    detail += fmt("gamma %.2f err %.4f; ", gamma, err);
  }
  const double t = seconds_since(t0);
  ok = ok && t < kFitSeconds;
  report(3, "curve expressivity", ok, detail + fmt("%.2fs (limit %.0fs)", t, kFitSeconds));
}

// ---------------------------------------------------------------- 4, 5

json run_cmd(const std::string& cmd, const fs::path& out, const std::vector<std::string>& overrides,
             std::uint64_t seed = kSeed) {
  const auto cfg = pipeline::resolve_config(cmd, std::nullopt, overrides, seed);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = pipeline::run(cmd, cfg, out, pipeline::RunFlags{true, false});
  note(fmt("%s -> %s (%.0fs)", cmd.c_str(), out.filename().c_str(), seconds_since(t0)));
  return res;
}

json load_report(const fs::path& dir) { return json::parse(read_text_file(dir / "report.json")); }
double wg(const json& r) { return r.at("worst_group_accuracy").get<double>(); }
double auc(const json& r) { return r.at("roc_auc").at("value").get<double>(); }

void closed_loop(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = root / "data";
  run_cmd("gen-data", data,
          {"shifted_domain=true", fmt("shift.gamma=%g", kShiftGamma), fmt("shift.sigmoid_gain=%g", kShiftGain),
           fmt("shift.out_bit_depth=%d", kShiftBits)});
  const auto ref_train = (data / "reference" / "train.json").string();
  const auto ref_test = (data / "reference" / "test.json").string();
  const auto sh_train = (data / "shifted" / "train.json").string();
  const auto sh_test = (data / "shifted" / "test.json").string();

  const std::vector<std::string> clf = {"train_manifest=" + ref_train, fmt("lr=%g", kClassifierLr),
                                        fmt("epochs=%d", kClassifierEpochs)};
  run_cmd("train-clf", root / "clf", clf);
  auto zclf = clf;
  zclf.push_back("normalization=zscore");
  run_cmd("train-clf", root / "clf_z", zclf);
  const auto classifier = (root / "clf" / "classifier.ckpt").string();

  run_cmd("eval", root / "eval_ref", {"classifier=" + classifier, "manifest=" + ref_test});
  run_cmd("eval", root / "eval_shift", {"classifier=" + classifier, "manifest=" + sh_test});
  run_cmd("eval", root / "eval_z", {"classifier=" + (root / "clf_z" / "classifier.ckpt").string(), "manifest=" + sh_test});

  run_cmd("train-gdce", root / "gdce",
          {"train_manifest=" + sh_train, "reference_manifest=" + ref_train, "classifier=" + classifier,
           fmt("epochs=%d", kGdceEpochs)});
  run_cmd("eval", root / "eval_gdce",
          {"classifier=" + classifier, "manifest=" + sh_test, "gdce=" + (root / "gdce" / "gdce.ckpt").string()});

  const auto ref = load_report(root / "eval_ref"), sh = load_report(root / "eval_shift");
  const auto z = load_report(root / "eval_z"), g = load_report(root / "eval_gdce");
  const double t = seconds_since(t0);
  const bool a = wg(ref) >= kReferenceWorstGroup;
  const bool b = wg(ref) - wg(sh) >= kRequiredDrop;
  const bool c = wg(g) >= kRecoveryFraction * wg(ref);
  const bool d = auc(g) > auc(z) && auc(g) > auc(sh);
  const bool time_ok = t <= kLoopSeconds;
  report(4, "closed-loop recovery", a && b && c && d && time_ok,
         fmt("(a) reference worst-group %.3f [>=%.2f] %s; (b) shifted %.3f, drop %.3f [>=%.2f] %s; "
             "(c) enhanced %.3f [>=%.3f] %s; (d) AUC enhanced %.4f vs z-score %.4f, full-range %.4f %s; %.0fs (limit %.0fs)",
             wg(ref), kReferenceWorstGroup, a ? "ok" : "no", wg(sh), wg(ref) - wg(sh), kRequiredDrop, b ? "ok" : "no",
             wg(g), kRecoveryFraction * wg(ref), c ? "ok" : "no", auc(g), auc(z), auc(sh), d ? "ok" : "no", t,
             kLoopSeconds));
}

void missing_classes(const fs::path& root) {
  const auto data = root / "data";
  bool ok = true;
  std::string detail;
  try {
    run_cmd("ablate", root / "ablate",
            {"train_manifest=" + (data / "shifted" / "train.json").string(),
             "reference_manifest=" + (data / "reference" / "train.json").string(),
             "test_manifest=" + (data / "shifted" / "test.json").string(),
             "classifier=" + (root / "clf" / "classifier.ckpt").string(), "drop_classes=[\"A\",\"D\"]",
             "layers=[2,12]", "iterations=[8]", fmt("epochs=%d", kAblationEpochs)});
    const auto grid = json::parse(read_text_file(root / "ablate" / "grid.json"));
    const auto& L = grid.at("layers");
    ok = L.size() == 2 && grid.at("validation").size() == 2 && grid.at("test").size() == 2;
    for (std::size_t i = 0; ok && i < L.size(); ++i) {
      detail += fmt("L=%d N=8 validation %.3f test %.3f; ", L[i].get<int>(), grid.at("validation")[i][0].get<double>(),
                    grid.at("test")[i][0].get<double>());
    }
    std::fputs(read_text_file(root / "ablate" / "grid.txt").c_str(), stderr);
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  report(5, "missing-class ablation", ok, detail + "values recorded, direction not asserted");
}

// ---------------------------------------------------------------- 6

bool next_pattern(std::vector<int>& digits, int base) {
  for (auto& d : digits) {
    if (++d < base) return true;
    d = 0;
  }
  return false;
}

void metric_oracles() {
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  long checked = 0, mismatches = 0;
  for (int n = 1; n <= kMaxOracleSamples; ++n) {
    std::vector<int> sidx(static_cast<std::size_t>(n), 0);
    do {
      std::vector<double> scores(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) scores[i] = grid[sidx[i]];
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> pos(static_cast<std::size_t>(n));
        std::unique_ptr<bool[]> posb(new bool[static_cast<std::size_t>(n)]);
        for (int i = 0; i < n; ++i) {
          pos[i] = static_cast<int>((mask >> i) & 1u);
          posb[i] = pos[i] != 0;
        }
        const auto want = oracle::pairwise_auc(scores, pos);
        const auto got = eval::binary_auc(scores, std::span<const bool>(posb.get(), static_cast<std::size_t>(n)));
        ++checked;
        if (want.has_value() != got.has_value() || (want && std::abs(*want - *got) > 1e-12)) ++mismatches;
      }
    } while (next_pattern(sidx, static_cast<int>(grid.size())));
  }

  // Multi-class one-vs-rest macro average over present classes.
  Rng rng(6);
  for (int t = 0; t < 20000; ++t) {
    const int n = 2 + static_cast<int>(rng.below(kMaxOracleSamples - 1));
    const int k = 3;
    std::vector<double> probs(static_cast<std::size_t>(n * k));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& p : probs) p = grid[rng.below(grid.size())];
    for (auto& l : labels) l = static_cast<int>(rng.below(k));
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < k; ++c) {
      std::vector<double> s(static_cast<std::size_t>(n));
      std::vector<int> pos(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        s[i] = probs[static_cast<std::size_t>(i * k + c)];
        pos[i] = labels[i] == c;
      }
      if (const auto a = oracle::pairwise_auc(s, pos)) {
        sum += *a;
        ++present;
      }
    }
    if (present == 0) continue;
    ++checked;
    if (std::abs(eval::roc_auc(probs, labels, k).value - sum / present) > 1e-12) ++mismatches;
  }

  // Precision/recall against raw counts and the confusion-matrix route, all
  // 3-class prediction/label patterns up to 5 samples.
  long pr_checked = 0;
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> digits(static_cast<std::size_t>(2 * n), 0);
    do {
      const std::vector<int> preds(digits.begin(), digits.begin() + n), labels(digits.begin() + n, digits.end());
      const auto cm = eval::confusion_matrix(preds, labels, 3);
      for (int c = 0; c < 3; ++c) {
        const auto cnt = oracle::count_outcomes(preds, labels, c);
        const auto a = eval::precision_recall(preds, labels, c);
        const auto b = eval::precision_recall(cm, c);
        ++pr_checked;
        bool ok = a.precision_undefined == (cnt.tp + cnt.fp == 0) && a.recall_undefined == (cnt.tp + cnt.fn == 0);
        if (!a.precision_undefined) ok = ok && std::abs(a.precision - double(cnt.tp) / double(cnt.tp + cnt.fp)) < 1e-12;
        if (!a.recall_undefined) ok = ok && std::abs(a.recall - double(cnt.tp) / double(cnt.tp + cnt.fn)) < 1e-12;
        ok = ok && a.precision == b.precision && a.recall == b.recall &&
             a.precision_undefined == b.precision_undefined && a.recall_undefined == b.recall_undefined;
        if (!ok) ++mismatches;
      }
    } while (next_pattern(digits, 3));
  }
  report(6, "metric oracles", mismatches == 0,
         fmt("%ld AUC cases, %ld precision/recall cases, %ld mismatches", checked, pr_checked, mismatches));
}

// ---------------------------------------------------------------- 7

std::string file_hash(const fs::path& p) {
  Fnv1a h;
  h.update(read_text_file(p));
  return h.hex();
}

struct RunDigest {
  std::vector<std::string> reports;
  std::vector<std::string> hashes;
};

RunDigest small_end_to_end(const fs::path& root) {
  const auto data = root / "data";
  run_cmd("gen-data", data,
          {"shifted_domain=true", "synth.train_per_class=30", "synth.test_per_class=10", "synth.image_size=32",
           "shift.gamma=0.5", "shift.sigmoid_gain=3", "shift.out_bit_depth=12"},
          7);
  run_cmd("train-clf", root / "clf",
          {"train_manifest=" + (data / "reference" / "train.json").string(), "epochs=3", "lr=1e-3"}, 7);
  run_cmd("train-gdce", root / "gdce",
          {"train_manifest=" + (data / "shifted" / "train.json").string(),
           "reference_manifest=" + (data / "reference" / "train.json").string(),
           "classifier=" + (root / "clf" / "classifier.ckpt").string(), "epochs=2", "arch.image_size=32"},
          7);
  run_cmd("eval", root / "eval",
          {"classifier=" + (root / "clf" / "classifier.ckpt").string(),
           "manifest=" + (data / "shifted" / "test.json").string(), "gdce=" + (root / "gdce" / "gdce.ckpt").string()},
          7);
  RunDigest d;
  for (const auto* f : {"clf/val_report.json", "gdce/val_report.json", "eval/report.json", "eval/report.txt"}) {
    d.reports.push_back(read_text_file(root / f));
  }
  for (const auto* f : {"clf/classifier.ckpt", "gdce/gdce.ckpt", "clf/train_log.jsonl", "gdce/train_log.jsonl",
                        "data/shifted/test.json"}) {
    d.hashes.push_back(file_hash(root / f));
  }
  return d;
}

void determinism(const fs::path& root) {
  bool ok = false;
  std::string detail;
  try {
    const auto a = small_end_to_end(root / "run1");
    const auto b = small_end_to_end(root / "run2");
    ok = a.reports == b.reports && a.hashes == b.hashes;
    detail = fmt("reports %s, checkpoint hashes %s (classifier %s, enhancer %s)",
                 a.reports == b.reports ? "identical" : "differ", a.hashes == b.hashes ? "identical" : "differ",
                 a.hashes[0].c_str(), a.hashes[1].c_str());
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(7, "determinism", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional argument: keep artifacts in this directory instead of a
  // scratch one.
  std::optional<TempDir> scratch;
  fs::path root;
  if (argc > 1) {
    root = argv[1];
    fs::create_directories(root);
  } else {
    scratch.emplace("acceptance");
    root = scratch->path();
  }
  curve_invariants();
  gradient_suite();
  curve_expressivity();
  try {
    closed_loop(root / "loop");
  } catch (const std::exception& e) {
    report(4, "closed-loop recovery", false, e.what());
  }
  missing_classes(root / "loop");
  metric_oracles();
  determinism(root / "determinism");
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
