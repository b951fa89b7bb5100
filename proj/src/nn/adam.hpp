#pragma once

#include <cstdint>
#include <vector>

#include "nn/network.hpp"

namespace gdce::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every parameter of a network.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  const AdamOptions& options() const { return opts_; }
  std::int64_t steps() const { return step_; }

  // Applies one update using the gradients currently stored in `net`.
  // Refuses frozen networks and non-finite gradients.
  void step(Network<T>& net);

  // Moments in parameter order, for checkpointing.
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void restore(std::int64_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  AdamOptions opts_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace gdce::nn
