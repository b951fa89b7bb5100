#include "pipeline/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "common/rng.hpp"
#include "curve/curve.hpp"
#include "models/models.hpp"
#include "nn/layers.hpp"
#include "nn/loss.hpp"
#include "train/training.hpp"

namespace gdce::pipeline {

using nlohmann::json;

namespace {

constexpr double kStep = 1e-5;

double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}); }

// Checks d loss / d v[i] for the chosen indices of `v`.
double check_vector(std::span<double> v, std::span<const double> analytic, const std::function<double()>& loss,
                    const std::vector<std::size_t>& idx) {
  double worst = 0.0;
  for (auto i : idx) {
    const double keep = v[i];
    v[i] = keep + kStep;
    const double up = loss();
    v[i] = keep - kStep;
    const double down = loss();
    v[i] = keep;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kStep)));
  }
  return worst;
}

std::vector<std::size_t> pick(std::size_t n, int count, Rng& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (static_cast<std::size_t>(count) >= n) return all;
  rng.shuffle(all.begin(), all.end());
  all.resize(static_cast<std::size_t>(count));
  return all;
}

// Inputs bounded away from zero so activation kinks stay out of reach.
std::vector<double> away_from_zero(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return v;
}

GradCheckEntry check_layer(const std::string& op, const json& desc, nn::Shape in, const GradCheckOptions& o, Rng& rng) {
  auto layer = nn::make_layer<double>(desc);
  layer->init(rng.next_u64());
  nn::Tensor<double> x(in, away_from_zero(in.numel(), rng));
  const nn::Shape out = layer->output_shape(in);
  std::vector<double> w(out.numel());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  auto loss = [&] {
    const auto y = layer->forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * y.data[i];
    return s;
  };
  for (auto* p : layer->params()) {
    p->ensure_grad();
    std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }
  loss();
  const auto dx = layer->backward(nn::Tensor<double>(out, w), true);
  GradCheckEntry e{op, 0.0, o.tolerance, 0};
  std::vector<std::size_t> idx = pick(x.size(), o.samples_per_param * 4, rng);
  e.max_rel_error = check_vector(x.data, dx.data, loss, idx);
  e.checked += static_cast<long>(idx.size());
  for (auto* p : layer->params()) {
    const auto analytic = p->grad;
    idx = pick(p->value.size(), o.samples_per_param, rng);
    e.max_rel_error = std::max(e.max_rel_error, check_vector(p->value, analytic, loss, idx));
    e.checked += static_cast<long>(idx.size());
  }
  return e;
}

GradCheckEntry check_softmax_ce(const GradCheckOptions& o, Rng& rng) {
  GradCheckEntry e{"softmax-ce", 0.0, o.tolerance, 0};
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> z(5);
    for (auto& v : z) v = rng.uniform(-4.0, 4.0);
    const int label = static_cast<int>(rng.below(z.size()));
    const auto r = nn::softmax_cross_entropy<double>(z, label);
    auto loss = [&] { return nn::softmax_cross_entropy<double>(z, label).loss; };
    e.max_rel_error = std::max(e.max_rel_error, check_vector(z, r.grad, loss, pick(z.size(), 5, rng)));
    e.checked += 5;
  }
  return e;
}

GradCheckEntry check_curve(const GradCheckOptions& o, Rng& rng) {
  GradCheckEntry e{"curve", 0.0, o.curve_tolerance, 0};
  const std::size_t pixels = 64;
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> x(pixels), a(static_cast<std::size_t>(n)), w(pixels), y(pixels);
    for (auto& v : x) v = rng.uniform(0.02, 0.98);
    for (auto& v : a) v = rng.uniform(-0.95, 0.95);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    auto loss = [&] {
      curve::curve_forward<double>(x, a, y);
      double s = 0.0;
      for (std::size_t i = 0; i < pixels; ++i) s += w[i] * y[i];
      return s;
    };
    std::vector<double> da(a.size(), 0.0);
    curve::curve_backward<double>(x, a, w, da);
    e.max_rel_error = std::max(e.max_rel_error, check_vector(a, da, loss, pick(a.size(), n, rng)));
    e.checked += n;

    // Input gradient: product of per-step factors, weighted.
    const image::UnitImage img(8, 8, x);
    const auto dx = curve::curve_grad_input(img, curve::CurveCoefficients(a));
    std::vector<double> wdx(pixels);
    for (std::size_t i = 0; i < pixels; ++i) wdx[i] = w[i] * dx[i];
    e.max_rel_error = std::max(e.max_rel_error, check_vector(x, wdx, loss, pick(pixels, 16, rng)));
    e.checked += 16;
  }
  return e;
}

GradCheckEntry check_composite(const GradCheckOptions& o, Rng& rng) {
  models::GdceConfig gc;
  gc.layers = 2;
  gc.conv_channels = 3;
  gc.iterations = 4;
  gc.dense1 = 8;
  gc.dense2 = 6;
  gc.grid = 2;
  gc.image_size = 8;
  auto gdce = models::make_gdce<double>(gc, rng.next_u64());
  // Random head so gradients reach every layer.
  for (std::size_t i = 0; i < gdce.depth(); ++i) gdce.layer(i).init(rng.next_u64());
  for (auto* p : gdce.params()) {
    for (auto& v : p->value) v *= 0.5;
  }
  models::DiscriminatorConfig dc;
  dc.classes = 3;
  dc.channels = {3, 4};
  dc.hidden = 6;
  dc.grid = 2;
  auto disc = models::make_discriminator<double>(dc, rng.next_u64());
  disc.set_frozen(true);
  models::PerceptualConfig pc;
  pc.channels = {3, 4};
  pc.tap = 2;
  auto ext = models::make_perceptual<double>(pc);

  const nn::Shape s{2, 1, 8, 8};
  nn::Tensor<double> x(s), refs(s);
  for (auto& v : x.data) v = rng.uniform(0.05, 0.95);
  for (auto& v : refs.data) v = rng.uniform(0.05, 0.95);
  const std::vector<int> labels = {0, 2};

  gdce.zero_grad();
  train::gdce_loss<double>(x, labels, gdce, disc, ext, refs);
  std::vector<std::vector<double>> analytic;
  for (auto* p : gdce.params()) analytic.emplace_back(p->grad.begin(), p->grad.end());
  auto loss = [&] { return train::gdce_loss<double>(x, labels, gdce, disc, ext, refs).total; };

  GradCheckEntry e{"composite-loss", 0.0, o.tolerance, 0};
  const auto params = gdce.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto idx = pick(params[k]->value.size(), o.samples_per_param, rng);
    e.max_rel_error = std::max(e.max_rel_error, check_vector(params[k]->value, analytic[k], loss, idx));
    e.checked += static_cast<long>(idx.size());
  }
  return e;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {0x4752414443ULL}));
  std::vector<GradCheckEntry> out;
  out.push_back(check_layer("conv3x3", {{"kind", "conv3x3"}, {"in", 2}, {"out", 3}}, {2, 2, 5, 6}, o, rng));
  out.push_back(check_layer("avgpool2x2", {{"kind", "avgpool2x2"}}, {2, 2, 5, 6}, o, rng));
  out.push_back(check_layer("adaptive-avgpool", {{"kind", "adaptive-avgpool"}, {"out_h", 3}, {"out_w", 2}},
                            {2, 2, 7, 5}, o, rng));
  out.push_back(check_layer("dense", {{"kind", "dense"}, {"in", 12}, {"out", 5}}, {2, 3, 2, 2}, o, rng));
  out.push_back(check_layer("leaky-relu", {{"kind", "leaky-relu"}, {"slope", 0.01}}, {2, 3, 4, 4}, o, rng));
  out.push_back(check_layer("tanh", {{"kind", "tanh"}}, {2, 3, 4, 4}, o, rng));
  out.push_back(check_softmax_ce(o, rng));
  out.push_back(check_curve(o, rng));
  out.push_back(check_composite(o, rng));
  return out;
}

json to_json(const std::vector<GradCheckEntry>& entries) {
  json ops = json::array();
  bool ok = true;
  for (const auto& e : entries) {
    ops.push_back({{"op", e.op},
                   {"max_rel_error", e.max_rel_error},
                   {"tolerance", e.tolerance},
                   {"checked", e.checked},
                   {"passed", e.passed()}});
    ok = ok && e.passed();
  }
  return {{"ops", ops}, {"passed", ok}};
}

}  // namespace gdce::pipeline
