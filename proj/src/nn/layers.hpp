#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nn/tensor.hpp"

namespace gdce::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty until gradients are requested

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

enum class LayerKind { Conv3x3, AvgPool2x2, AdaptiveAvgPool, Dense, LeakyReLU, Tanh };

std::string to_string(LayerKind k);

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual nlohmann::json describe() const = 0;
  // Throws DataError if `in` is incompatible with this layer.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  // Consumes the forward cache. Parameter gradients are accumulated only when
  // `param_grads` is set.
  virtual Tensor<T> backward(const Tensor<T>& dy, bool param_grads) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::vector<const Param<T>*> params() const { return {}; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
  virtual void init(std::uint64_t /*seed*/) {}
};

// 3x3 convolution, stride 1, zero padding 1.
template <typename T>
class Conv3x3 final : public Layer<T> {
 public:
  Conv3x3(int in_channels, int out_channels);
  LayerKind kind() const override { return LayerKind::Conv3x3; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param<T>*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv3x3>(*this); }
  void init(std::uint64_t seed) override;

 private:
  int in_, out_;
  Param<T> weight_;  // [out, in, 3, 3]
  Param<T> bias_;    // [out]
  Shape in_shape_;
  Buffer<T> cols_;  // im2col per sample, concatenated
  bool cached_ = false;
};

// 2x2 mean pooling, stride 2; odd trailing rows/columns are dropped.
template <typename T>
class AvgPool2x2 final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::AvgPool2x2; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<AvgPool2x2>(*this); }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

// Mean over a fixed output grid; bin i spans [floor(i*H/oh), ceil((i+1)*H/oh)).
template <typename T>
class AdaptiveAvgPool final : public Layer<T> {
 public:
  AdaptiveAvgPool(int out_h, int out_w) : oh_(out_h), ow_(out_w) {}
  LayerKind kind() const override { return LayerKind::AdaptiveAvgPool; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<AdaptiveAvgPool>(*this);
  }

 private:
  int oh_, ow_;
  Shape in_shape_;
  bool cached_ = false;
};

// Fully connected; flattens each sample's (c, h, w).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features);
  LayerKind kind() const override { return LayerKind::Dense; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param<T>*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  void init(std::uint64_t seed) override;

 private:
  int in_, out_;
  Param<T> weight_;  // [out, in]
  Param<T> bias_;    // [out]
  Tensor<T> x_;
  bool cached_ = false;
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_desc_(slope), slope_(static_cast<T>(slope)) {}
  LayerKind kind() const override { return LayerKind::LeakyReLU; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyReLU>(*this); }

 private:
  double slope_desc_;
  T slope_;
  Tensor<T> x_;
  bool cached_ = false;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Tanh; }
  nlohmann::json describe() const override;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh>(*this); }

 private:
  Tensor<T> y_;
  bool cached_ = false;
};

// Builds a layer from its describe() record.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const nlohmann::json& desc);

}  // namespace gdce::nn
