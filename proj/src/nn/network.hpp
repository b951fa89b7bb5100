#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nn/layers.hpp"

namespace gdce::nn {

// Ordered stack of layers plus the architecture record needed to rebuild it.
// The descriptor is {"role": ..., "config": {...}, "layers": [...]}.
//
// A Network is single-writer: forward() stores per-layer caches that
// backward() consumes. Use clone() to give each worker its own instance.
template <typename T>
class Network {
 public:
  Network() = default;
  // Builds the layers listed in `descriptor` and initializes them from `seed`.
  Network(nlohmann::json descriptor, std::uint64_t seed);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const nlohmann::json& descriptor() const { return descriptor_; }
  std::string role() const;
  std::uint64_t seed() const { return seed_; }
  std::size_t depth() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  // Runs the first `upto` layers (all by default). Rejects non-finite values
  // at every layer boundary.
  Tensor<T> forward(const Tensor<T>& x, std::size_t upto = static_cast<std::size_t>(-1));
  // Back-propagates through the layers run by the last forward(). Parameter
  // gradients are accumulated unless the network is frozen.
  Tensor<T> backward(const Tensor<T>& dy);

  Shape output_shape(const Shape& in, std::size_t upto = static_cast<std::size_t>(-1)) const;

  std::vector<Param<T>*> params();
  std::vector<const Param<T>*> params() const;
  std::size_t num_params() const;
  void zero_grad();
  bool has_grad_buffers() const;

  // Hash of all parameter bytes; equal iff weights are bitwise equal.
  std::string checksum() const;

  template <typename U>
  Network<U> cast() const;

 private:
  nlohmann::json descriptor_;
  std::uint64_t seed_ = 0;
  bool frozen_ = false;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::size_t forwarded_ = 0;
};

}  // namespace gdce::nn
