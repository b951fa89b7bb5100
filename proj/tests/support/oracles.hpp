#pragma once

// Reference computations used only by tests. They share no code with the
// library: gradients come from central differences, AUC from counting every
// positive/negative pair, precision/recall from raw prediction counts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

inline double rel_error(double a, double n, double floor = 1e-4) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// d f / d v[i] by central differences, restoring v[i] afterwards.
template <typename V>
double central_diff(V& v, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
  const auto keep = v[i];
  v[i] = keep + h;
  const double up = f();
  v[i] = keep - h;
  const double down = f();
  v[i] = keep;
  return (up - down) / (2.0 * h);
}

// Largest relative error between `analytic` and central differences over
// every element of `v`.
template <typename V, typename A>
double max_fd_error(V& v, const A& analytic, const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    worst = std::max(worst, rel_error(static_cast<double>(analytic[i]), central_diff(v, i, f, h)));
  }
  return worst;
}

// Probability that a random positive outscores a random negative, ties
// counting one half. Empty when either side is empty.
inline std::optional<double> pairwise_auc(std::span<const double> scores, std::span<const int> positive) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

inline Counts count_outcomes(std::span<const int> preds, std::span<const int> labels, int positive) {
  Counts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive, l = labels[i] == positive;
    if (p && l) ++c.tp;
    else if (p) ++c.fp;
    else if (l) ++c.fn;
  }
  return c;
}

}  // namespace oracle
