#pragma once

#include <span>
#include <vector>

#include "image/image.hpp"

// Iterative quadratic tone curve: x <- x + a_n * x * (1 - x), n = 1..N.
// For x in [0,1] and |a_n| <= 1 every step stays inside [0,1], so no clamping
// is ever applied. 0 and 1 are fixed points.
namespace gdce::curve {

inline constexpr int kDefaultIterations = 8;

class CurveCoefficients {
 public:
  CurveCoefficients() = default;
  // Throws DataError if empty or any |alpha| > 1 (or non-finite).
  explicit CurveCoefficients(std::vector<double> alphas);

  std::size_t size() const { return alphas_.size(); }
  std::span<const double> alphas() const { return alphas_; }
  double operator[](std::size_t i) const { return alphas_[i]; }

  static CurveCoefficients identity(int n) {
    return CurveCoefficients(std::vector<double>(static_cast<std::size_t>(n), 0.0));
  }

 private:
  std::vector<double> alphas_;
};

void validate_alphas(std::span<const double> alphas);

template <typename T>
inline T curve_value(T x, std::span<const T> alphas) {
  for (T a : alphas) x = x + a * x * (T(1) - x);
  return x;
}

image::UnitImage apply_curve(const image::UnitImage& img, const CurveCoefficients& c);

// Row-major [pixel][iteration] matrix of dI_N/d(alpha_n).
struct AlphaGradients {
  std::size_t pixels = 0;
  std::size_t iterations = 0;
  std::vector<double> values;

  double at(std::size_t pixel, std::size_t n) const { return values[pixel * iterations + n]; }
  // Sum over pixels, one entry per iteration.
  std::vector<double> summed() const;
};

AlphaGradients curve_grad_alpha(const image::UnitImage& img, const CurveCoefficients& c);

// Per-pixel dI_N/dI_0 = prod_n (1 + a_n (1 - 2 I_{n-1})).
std::vector<double> curve_grad_input(const image::UnitImage& img, const CurveCoefficients& c);

// Vector-Jacobian product used by training: given upstream dL/dI_N per pixel,
// accumulates dL/d(alpha) into `alpha_grad` (size N). Works on any real type.
template <typename T>
void curve_backward(std::span<const T> input, std::span<const T> alphas,
                    std::span<const T> upstream, std::span<T> alpha_grad);

// Applies the curve elementwise to `input` writing to `output`.
template <typename T>
void curve_forward(std::span<const T> input, std::span<const T> alphas, std::span<T> output);

struct FitResult {
  CurveCoefficients coefficients;
  double max_error = 0.0;
  int sweeps = 0;
};

struct FitOptions {
  int max_sweeps = 4000;
  double tolerance = 1e-12;
};

// Fits N coefficients to a monotone target sampled on a uniform grid over
// [0,1] (target.front() == 0, target.back() == 1), minimizing the maximum
// grid error. Coordinate descent with analytic per-coordinate Newton steps on
// a reweighted least-squares objective; the weights are updated toward the
// minimax solution (Lawson iteration). Returns the best iterate seen.
FitResult fit_curve_to_target(std::span<const double> target, int iterations,
                              const FitOptions& options = {});

}  // namespace gdce::curve
