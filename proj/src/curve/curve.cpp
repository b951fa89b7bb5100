#include "curve/curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace gdce::curve {

void validate_alphas(std::span<const double> alphas) {
  if (alphas.empty()) throw DataError("curve needs at least one coefficient");
  for (double a : alphas) {
    if (!std::isfinite(a) || a < -1.0 || a > 1.0) {
      throw DataError("curve coefficient " + std::to_string(a) + " outside [-1,1]");
    }
  }
}

CurveCoefficients::CurveCoefficients(std::vector<double> alphas) : alphas_(std::move(alphas)) {
  validate_alphas(alphas_);
}

image::UnitImage apply_curve(const image::UnitImage& img, const CurveCoefficients& c) {
  validate_alphas(c.alphas());
  std::vector<double> out(img.size());
  curve_forward<double>(img.values(), c.alphas(), out);
  return image::UnitImage(img.width(), img.height(), std::move(out));
}

std::vector<double> AlphaGradients::summed() const {
  std::vector<double> s(iterations, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t n = 0; n < iterations; ++n) s[n] += at(p, n);
  }
  return s;
}

AlphaGradients curve_grad_alpha(const image::UnitImage& img, const CurveCoefficients& c) {
  validate_alphas(c.alphas());
  const auto a = c.alphas();
  const std::size_t n_iter = a.size();
  AlphaGradients g{img.size(), n_iter, std::vector<double>(img.size() * n_iter)};
  std::vector<double> states(n_iter);
  for (std::size_t p = 0; p < img.size(); ++p) {
    double x = img[p];
    for (std::size_t n = 0; n < n_iter; ++n) {
      states[n] = x;
      x = x + a[n] * x * (1.0 - x);
    }
    // carry = dI_N / dI_n, walked backward from n = N.
    double carry = 1.0;
    for (std::size_t n = n_iter; n-- > 0;) {
      const double prev = states[n];
      g.values[p * n_iter + n] = carry * prev * (1.0 - prev);
      carry *= 1.0 + a[n] * (1.0 - 2.0 * prev);
    }
  }
  return g;
}

std::vector<double> curve_grad_input(const image::UnitImage& img, const CurveCoefficients& c) {
  validate_alphas(c.alphas());
  std::vector<double> out(img.size());
  for (std::size_t p = 0; p < img.size(); ++p) {
    double x = img[p];
    double d = 1.0;
    for (double a : c.alphas()) {
      d *= 1.0 + a * (1.0 - 2.0 * x);
      x = x + a * x * (1.0 - x);
    }
    out[p] = d;
  }
  return out;
}

template <typename T>
void curve_forward(std::span<const T> input, std::span<const T> alphas, std::span<T> output) {
  for (std::size_t p = 0; p < input.size(); ++p) output[p] = curve_value<T>(input[p], alphas);
}

template <typename T>
void curve_backward(std::span<const T> input, std::span<const T> alphas,
                    std::span<const T> upstream, std::span<T> alpha_grad) {
  const std::size_t n_iter = alphas.size();
  std::vector<T> states(n_iter);
  for (std::size_t p = 0; p < input.size(); ++p) {
    const T g = upstream[p];
    if (g == T(0)) continue;
    T x = input[p];
    for (std::size_t n = 0; n < n_iter; ++n) {
      states[n] = x;
      x = x + alphas[n] * x * (T(1) - x);
    }
    T carry = g;
    for (std::size_t n = n_iter; n-- > 0;) {
      const T prev = states[n];
      alpha_grad[n] += carry * prev * (T(1) - prev);
      carry *= T(1) + alphas[n] * (T(1) - T(2) * prev);
    }
  }
}

template void curve_forward<float>(std::span<const float>, std::span<const float>, std::span<float>);
template void curve_forward<double>(std::span<const double>, std::span<const double>, std::span<double>);
template void curve_backward<float>(std::span<const float>, std::span<const float>,
                                    std::span<const float>, std::span<float>);
template void curve_backward<double>(std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>);

namespace {

struct GridState {
  std::vector<double> residual;  // f(x) - target
  std::vector<double> jacobian;  // [point][iteration]
};

void evaluate(std::span<const double> grid, std::span<const double> target,
              std::span<const double> alphas, GridState& st) {
  const std::size_t n_iter = alphas.size();
  st.residual.resize(grid.size());
  st.jacobian.resize(grid.size() * n_iter);
  std::vector<double> states(n_iter);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double x = grid[p];
    for (std::size_t n = 0; n < n_iter; ++n) {
      states[n] = x;
      x = x + alphas[n] * x * (1.0 - x);
    }
    st.residual[p] = x - target[p];
    double carry = 1.0;
    for (std::size_t n = n_iter; n-- > 0;) {
      const double prev = states[n];
      st.jacobian[p * n_iter + n] = carry * prev * (1.0 - prev);
      carry *= 1.0 + alphas[n] * (1.0 - 2.0 * prev);
    }
  }
}

double weighted_sse(std::span<const double> residual, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t p = 0; p < residual.size(); ++p) s += w[p] * residual[p] * residual[p];
  return s;
}

double max_abs(std::span<const double> r) {
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

FitResult fit_curve_to_target(std::span<const double> target, int iterations,
                              const FitOptions& options) {
  if (iterations < 1) throw UsageError("curve fit needs at least one iteration");
  if (target.size() < 2) throw DataError("target needs at least two grid samples");
  if (std::abs(target.front()) > 1e-12 || std::abs(target.back() - 1.0) > 1e-12) {
    throw DataError("target must map 0 to 0 and 1 to 1");
  }
  for (double t : target) {
    if (!(t >= 0.0 && t <= 1.0)) throw DataError("target values must lie in [0,1]");
  }
  const std::size_t m = target.size();
  const auto n_iter = static_cast<std::size_t>(iterations);
  std::vector<double> grid(m);
  for (std::size_t i = 0; i < m; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(m - 1);

  std::vector<double> alphas(n_iter, 0.0);
  std::vector<double> weights(m, 1.0 / static_cast<double>(m));
  GridState st;
  evaluate(grid, target, alphas, st);

  FitResult best{CurveCoefficients(alphas), max_abs(st.residual), 0};
  std::vector<double> trial(n_iter);
  GridState trial_st;

  // Lawson reweighting is applied every `inner` sweeps.
  constexpr int kInner = 8;
  int sweep = 0;
  for (; sweep < options.max_sweeps; ++sweep) {
    double sse = weighted_sse(st.residual, weights);
    bool moved = false;
    for (std::size_t n = 0; n < n_iter; ++n) {
      double g = 0.0;
      double h = 0.0;
      for (std::size_t p = 0; p < m; ++p) {
        const double j = st.jacobian[p * n_iter + n];
        g += weights[p] * st.residual[p] * j;
        h += weights[p] * j * j;
      }
      if (h <= 0.0) continue;
      double step = -g / h;
      for (int halving = 0; halving < 30; ++halving) {
        trial = alphas;
        trial[n] = std::clamp(alphas[n] + step, -1.0, 1.0);
        if (trial[n] == alphas[n]) break;
        evaluate(grid, target, trial, trial_st);
        const double s = weighted_sse(trial_st.residual, weights);
        if (s < sse) {
          alphas.swap(trial);
          std::swap(st, trial_st);
          sse = s;
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    const double err = max_abs(st.residual);
    if (err < best.max_error) {
      best.coefficients = CurveCoefficients(alphas);
      best.max_error = err;
      best.sweeps = sweep + 1;
    }
    if (best.max_error <= options.tolerance) break;
    // Reweight every few sweeps, or as soon as the current weights are
    // exhausted.
    if ((sweep + 1) % kInner == 0 || !moved) {
      double total = 0.0;
      for (std::size_t p = 0; p < m; ++p) {
        weights[p] *= std::abs(st.residual[p]) + 1e-300;
        total += weights[p];
      }
      if (!(total > 0.0)) break;
      for (auto& w : weights) w /= total;
    }
  }
  return best;
}

}  // namespace gdce::curve
