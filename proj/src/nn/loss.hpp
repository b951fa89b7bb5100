#pragma once

#include <span>
#include <vector>

namespace gdce::nn {

template <typename T>
struct CrossEntropy {
  T loss = 0;
  std::vector<T> grad;  // d loss / d logits = softmax - onehot
};

// -log softmax(logits)[label], computed with the log-sum-exp shift.
template <typename T>
CrossEntropy<T> softmax_cross_entropy(std::span<const T> logits, int label);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

}  // namespace gdce::nn
