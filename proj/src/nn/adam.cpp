#include "nn/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace gdce::nn {

template <typename T>
void Adam<T>::step(Network<T>& net) {
  if (net.frozen()) throw UsageError("optimizer step on frozen network '" + net.role() + "'");
  auto params = net.params();
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }
  if (m_.size() != params.size()) throw UsageError("optimizer state does not match network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i]->grad;
    if (g.empty()) continue;
    for (T x : g) {
      if (!std::isfinite(x)) throw NumericalError("non-finite gradient in " + net.role());
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  const T b1 = static_cast<T>(opts_.beta1);
  const T b2 = static_cast<T>(opts_.beta2);
  const T step_size = static_cast<T>(opts_.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(opts_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (p.grad.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T g = p.grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::int64_t step, std::vector<std::vector<T>> m,
                      std::vector<std::vector<T>> v) {
  if (step < 0 || m.size() != v.size()) throw DataError("invalid optimizer state");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace gdce::nn
