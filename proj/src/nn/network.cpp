#include "nn/network.hpp"

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"

namespace gdce::nn {

using nlohmann::json;

template <typename T>
Network<T>::Network(json descriptor, std::uint64_t seed)
    : descriptor_(std::move(descriptor)), seed_(seed) {
  if (!descriptor_.contains("layers") || !descriptor_["layers"].is_array()) {
    throw DataError("architecture descriptor has no layer list");
  }
  std::uint64_t idx = 0;
  for (const auto& d : descriptor_["layers"]) {
    auto layer = make_layer<T>(d);
    layer->init(derive_seed(seed_, {idx++}));
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Network<T>::Network(const Network& other)
    : descriptor_(other.descriptor_), seed_(other.seed_), frozen_(other.frozen_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

template <typename T>
std::string Network<T>::role() const {
  return descriptor_.value("role", std::string{});
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, std::size_t upto) {
  upto = std::min(upto, layers_.size());
  check_tensor_size(x.shape, x.size());
  check_finite<T>(x.data, role() + " input");
  Tensor<T> cur = x;
  for (std::size_t i = 0; i < upto; ++i) {
    cur = layers_[i]->forward(cur);
    check_finite<T>(cur.data, role() + " layer " + std::to_string(i) + " (" +
                               to_string(layers_[i]->kind()) + ")");
  }
  forwarded_ = upto;
  return cur;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& dy) {
  if (forwarded_ == 0) throw UsageError("backward called before forward on " + role());
  const bool grads = !frozen_;
  Tensor<T> cur = dy;
  for (std::size_t i = forwarded_; i-- > 0;) cur = layers_[i]->backward(cur, grads);
  forwarded_ = 0;
  return cur;
}

template <typename T>
Shape Network<T>::output_shape(const Shape& in, std::size_t upto) const {
  upto = std::min(upto, layers_.size());
  Shape s = in;
  for (std::size_t i = 0; i < upto; ++i) s = layers_[i]->output_shape(s);
  return s;
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> Network<T>::params() const {
  std::vector<const Param<T>*> out;
  for (const auto& l : layers_) {
    const Layer<T>& cl = *l;
    for (const auto* p : cl.params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::size_t Network<T>::num_params() const {
  std::size_t n = 0;
  for (const auto* p : params()) n += p->value.size();
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : params()) {
    if (!p->grad.empty()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }
}

template <typename T>
bool Network<T>::has_grad_buffers() const {
  for (const auto* p : params()) {
    if (!p->grad.empty()) return true;
  }
  return false;
}

template <typename T>
std::string Network<T>::checksum() const {
  Fnv1a h;
  for (const auto* p : params()) h.update(p->value.data(), p->value.size() * sizeof(T));
  return h.hex();
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(descriptor_, seed_);
  out.set_frozen(frozen_);
  auto src = params();
  auto dst = out.params();
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < src[i]->value.size(); ++j) {
      dst[i]->value[j] = static_cast<U>(src[i]->value[j]);
    }
  }
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;

}  // namespace gdce::nn
