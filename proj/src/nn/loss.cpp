#include "nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"

namespace gdce::nn {

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw DataError("softmax of empty logits");
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
CrossEntropy<T> softmax_cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T v : logits) sum += std::exp(v - mx);
  const T lse = mx + std::log(sum);
  CrossEntropy<T> out;
  out.loss = lse - logits[static_cast<std::size_t>(label)];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - lse);
  out.grad[static_cast<std::size_t>(label)] -= T(1);
  return out;
}

template std::vector<float> softmax<float>(std::span<const float>);
template std::vector<double> softmax<double>(std::span<const double>);
template CrossEntropy<float> softmax_cross_entropy<float>(std::span<const float>, int);
template CrossEntropy<double> softmax_cross_entropy<double>(std::span<const double>, int);

}  // namespace gdce::nn
