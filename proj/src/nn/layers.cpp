#include "nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace gdce::nn {

using nlohmann::json;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void check_tensor_size(const Shape& s, std::size_t len) {
  if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
    throw DataError("tensor shape " + s.str() + " has a non-positive extent");
  }
  if (s.numel() != len) {
    throw DataError("tensor data length " + std::to_string(len) + " does not match shape " + s.str());
  }
}

template <typename T>
void check_finite(std::span<const T> v, const std::string& where) {
  for (T x : v) {
    if (!std::isfinite(x)) throw NumericalError("non-finite value in " + where);
  }
}
template void check_finite<float>(std::span<const float>, const std::string&);
template void check_finite<double>(std::span<const double>, const std::string&);

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::AvgPool2x2: return "avgpool2x2";
    case LayerKind::AdaptiveAvgPool: return "adaptive-avgpool";
    case LayerKind::Dense: return "dense";
    case LayerKind::LeakyReLU: return "leaky-relu";
    case LayerKind::Tanh: return "tanh";
  }
  return "unknown";
}

namespace {

void require_cache(bool cached, LayerKind k) {
  if (!cached) throw UsageError("backward called before forward on " + to_string(k) + " layer");
}

template <typename T>
void fill_uniform(Buffer<T>& v, double bound, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace

// ---- Conv3x3 -------------------------------------------------------------

template <typename T>
Conv3x3<T>::Conv3x3(int in_channels, int out_channels) : in_(in_channels), out_(out_channels) {
  if (in_ <= 0 || out_ <= 0) throw UsageError("conv3x3 channel counts must be positive");
  weight_.name = "weight";
  weight_.shape = {out_, in_, 3, 3};
  weight_.value.assign(static_cast<std::size_t>(out_ * in_ * 9), T(0));
  bias_.name = "bias";
  bias_.shape = {out_};
  bias_.value.assign(static_cast<std::size_t>(out_), T(0));
}

template <typename T>
json Conv3x3<T>::describe() const {
  return {{"kind", "conv3x3"}, {"in", in_}, {"out", out_}};
}

template <typename T>
Shape Conv3x3<T>::output_shape(const Shape& in) const {
  if (in.c != in_) {
    throw DataError("conv3x3 expects " + std::to_string(in_) + " channels, got " + in.str());
  }
  return {in.n, out_, in.h, in.w};
}

template <typename T>
void Conv3x3<T>::init(std::uint64_t seed) {
  fill_uniform(weight_.value, std::sqrt(6.0 / (in_ * 9)), seed);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
}

namespace {

// cols is (C*9) x (H*W), row index ci*9 + ky*3 + kx.
template <typename T>
void im2col(const T* in, int c, int h, int w, T* cols) {
  const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (int ci = 0; ci < c; ++ci) {
    const T* plane = in + static_cast<std::size_t>(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = cols + static_cast<std::size_t>(ci * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          T* dst = row + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          std::fill(dst, dst + x0, T(0));
          std::memcpy(dst + x0, src + x0 + dx, sizeof(T) * static_cast<std::size_t>(x1 - x0));
          std::fill(dst + x1, dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, int c, int h, int w, T* out) {
  const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::fill(out, out + hw * static_cast<std::size_t>(c), T(0));
  for (int ci = 0; ci < c; ++ci) {
    T* plane = out + static_cast<std::size_t>(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = cols + static_cast<std::size_t>(ci * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + static_cast<std::size_t>(y) * w;
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          for (int x = x0; x < x1; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Conv3x3<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(output_shape(x.shape));
  in_shape_ = x.shape;
  const int hw = x.shape.h * x.shape.w;
  const int k = in_ * 9;
  const std::size_t cols_per = static_cast<std::size_t>(k) * static_cast<std::size_t>(hw);
  cols_.resize(cols_per * static_cast<std::size_t>(x.shape.n));
  CMapMat<T> wm(weight_.value.data(), out_, k);
  for (int i = 0; i < x.shape.n; ++i) {
    T* cols = cols_.data() + cols_per * static_cast<std::size_t>(i);
    im2col(x.sample(i), in_, x.shape.h, x.shape.w, cols);
    MapMat<T> ym(y.sample(i), out_, hw);
    ym.noalias() = wm * CMapMat<T>(cols, k, hw);
    for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[static_cast<std::size_t>(o)];
  }
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Conv3x3<T>::backward(const Tensor<T>& dy, bool param_grads) {
  require_cache(cached_, kind());
  cached_ = false;
  const Shape& s = in_shape_;
  if (dy.shape != output_shape(s)) throw DataError("conv3x3 backward: gradient shape mismatch");
  const int hw = s.h * s.w;
  const int k = in_ * 9;
  const std::size_t cols_per = static_cast<std::size_t>(k) * static_cast<std::size_t>(hw);
  Tensor<T> dx(s);
  CMapMat<T> wm(weight_.value.data(), out_, k);
  if (param_grads) {
    weight_.ensure_grad();
    bias_.ensure_grad();
  }
  Buffer<T> dcols(cols_per);
  for (int i = 0; i < s.n; ++i) {
    CMapMat<T> dym(dy.sample(i), out_, hw);
    const T* cols = cols_.data() + cols_per * static_cast<std::size_t>(i);
    if (param_grads) {
      MapMat<T> dw(weight_.grad.data(), out_, k);
      dw.noalias() += dym * CMapMat<T>(cols, k, hw).transpose();
      for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += dym.row(o).sum();
    }
    MapMat<T>(dcols.data(), k, hw).noalias() = wm.transpose() * dym;
    col2im(dcols.data(), in_, s.h, s.w, dx.sample(i));
  }
  return dx;
}

// ---- AvgPool2x2 ----------------------------------------------------------

template <typename T>
json AvgPool2x2<T>::describe() const {
  return {{"kind", "avgpool2x2"}};
}

template <typename T>
Shape AvgPool2x2<T>::output_shape(const Shape& in) const {
  if (in.h < 2 || in.w < 2) throw DataError("avgpool2x2 needs spatial size >= 2, got " + in.str());
  return {in.n, in.c, in.h / 2, in.w / 2};
}

template <typename T>
Tensor<T> AvgPool2x2<T>::forward(const Tensor<T>& x) {
  const Shape os = output_shape(x.shape);
  Tensor<T> y(os);
  in_shape_ = x.shape;
  const int w = x.shape.w;
  for (int p = 0; p < x.shape.n * x.shape.c; ++p) {
    const T* src = x.data.data() + static_cast<std::size_t>(p) * x.shape.plane();
    T* dst = y.data.data() + static_cast<std::size_t>(p) * os.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      const T* r0 = src + static_cast<std::size_t>(2 * oy) * w;
      const T* r1 = r0 + w;
      for (int ox = 0; ox < os.w; ++ox) {
        dst[oy * os.w + ox] = (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) * T(0.25);
      }
    }
  }
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> AvgPool2x2<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(cached_, kind());
  cached_ = false;
  const Shape os = output_shape(in_shape_);
  if (dy.shape != os) throw DataError("avgpool2x2 backward: gradient shape mismatch");
  Tensor<T> dx(in_shape_);
  const int w = in_shape_.w;
  for (int p = 0; p < in_shape_.n * in_shape_.c; ++p) {
    const T* g = dy.data.data() + static_cast<std::size_t>(p) * os.plane();
    T* dst = dx.data.data() + static_cast<std::size_t>(p) * in_shape_.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      T* r0 = dst + static_cast<std::size_t>(2 * oy) * w;
      T* r1 = r0 + w;
      for (int ox = 0; ox < os.w; ++ox) {
        const T v = g[oy * os.w + ox] * T(0.25);
        r0[2 * ox] = v;
        r0[2 * ox + 1] = v;
        r1[2 * ox] = v;
        r1[2 * ox + 1] = v;
      }
    }
  }
  return dx;
}

// ---- AdaptiveAvgPool -----------------------------------------------------

template <typename T>
json AdaptiveAvgPool<T>::describe() const {
  return {{"kind", "adaptive-avgpool"}, {"out_h", oh_}, {"out_w", ow_}};
}

template <typename T>
Shape AdaptiveAvgPool<T>::output_shape(const Shape& in) const {
  return {in.n, in.c, oh_, ow_};
}

namespace {
inline int bin_start(int i, int in, int out) { return (i * in) / out; }
inline int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

template <typename T>
Tensor<T> AdaptiveAvgPool<T>::forward(const Tensor<T>& x) {
  const Shape os = output_shape(x.shape);
  Tensor<T> y(os);
  in_shape_ = x.shape;
  const int h = x.shape.h, w = x.shape.w;
  for (int p = 0; p < x.shape.n * x.shape.c; ++p) {
    const T* src = x.data.data() + static_cast<std::size_t>(p) * x.shape.plane();
    T* dst = y.data.data() + static_cast<std::size_t>(p) * os.plane();
    for (int oy = 0; oy < oh_; ++oy) {
      const int y0 = bin_start(oy, h, oh_), y1 = bin_end(oy, h, oh_);
      for (int ox = 0; ox < ow_; ++ox) {
        const int x0 = bin_start(ox, w, ow_), x1 = bin_end(ox, w, ow_);
        T acc = 0;
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) acc += src[yy * w + xx];
        }
        dst[oy * ow_ + ox] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> AdaptiveAvgPool<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(cached_, kind());
  cached_ = false;
  if (dy.shape != output_shape(in_shape_)) {
    throw DataError("adaptive-avgpool backward: gradient shape mismatch");
  }
  Tensor<T> dx(in_shape_);
  const int h = in_shape_.h, w = in_shape_.w;
  const std::size_t oplane = static_cast<std::size_t>(oh_) * static_cast<std::size_t>(ow_);
  for (int p = 0; p < in_shape_.n * in_shape_.c; ++p) {
    const T* g = dy.data.data() + static_cast<std::size_t>(p) * oplane;
    T* dst = dx.data.data() + static_cast<std::size_t>(p) * in_shape_.plane();
    for (int oy = 0; oy < oh_; ++oy) {
      const int y0 = bin_start(oy, h, oh_), y1 = bin_end(oy, h, oh_);
      for (int ox = 0; ox < ow_; ++ox) {
        const int x0 = bin_start(ox, w, ow_), x1 = bin_end(ox, w, ow_);
        const T v = g[oy * ow_ + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) dst[yy * w + xx] += v;
        }
      }
    }
  }
  return dx;
}

// ---- Dense ---------------------------------------------------------------

template <typename T>
Dense<T>::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {
  if (in_ <= 0 || out_ <= 0) throw UsageError("dense layer sizes must be positive");
  weight_.name = "weight";
  weight_.shape = {out_, in_};
  weight_.value.assign(static_cast<std::size_t>(out_) * static_cast<std::size_t>(in_), T(0));
  bias_.name = "bias";
  bias_.shape = {out_};
  bias_.value.assign(static_cast<std::size_t>(out_), T(0));
}

template <typename T>
json Dense<T>::describe() const {
  return {{"kind", "dense"}, {"in", in_}, {"out", out_}};
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  if (in.per_sample() != static_cast<std::size_t>(in_)) {
    throw DataError("dense expects " + std::to_string(in_) + " features, got " + in.str());
  }
  return {in.n, out_, 1, 1};
}

template <typename T>
void Dense<T>::init(std::uint64_t seed) {
  fill_uniform(weight_.value, std::sqrt(6.0 / in_), seed);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(output_shape(x.shape));
  x_ = x;
  CMapMat<T> xm(x.data.data(), x.shape.n, in_);
  CMapMat<T> wm(weight_.value.data(), out_, in_);
  MapMat<T> ym(y.data.data(), x.shape.n, out_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < x.shape.n; ++i) {
    for (int o = 0; o < out_; ++o) ym(i, o) += bias_.value[static_cast<std::size_t>(o)];
  }
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy, bool param_grads) {
  require_cache(cached_, kind());
  cached_ = false;
  const int n = x_.shape.n;
  if (dy.shape != output_shape(x_.shape)) throw DataError("dense backward: gradient shape mismatch");
  CMapMat<T> dym(dy.data.data(), n, out_);
  CMapMat<T> xm(x_.data.data(), n, in_);
  CMapMat<T> wm(weight_.value.data(), out_, in_);
  if (param_grads) {
    weight_.ensure_grad();
    bias_.ensure_grad();
    MapMat<T>(weight_.grad.data(), out_, in_).noalias() += dym.transpose() * xm;
    for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += dym.col(o).sum();
  }
  Tensor<T> dx(x_.shape);
  MapMat<T>(dx.data.data(), n, in_).noalias() = dym * wm;
  x_ = Tensor<T>();
  return dx;
}

// ---- activations ---------------------------------------------------------

template <typename T>
json LeakyReLU<T>::describe() const {
  return {{"kind", "leaky-relu"}, {"slope", slope_desc_}};
}

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : slope_ * x.data[i];
  x_ = x;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(cached_, kind());
  cached_ = false;
  if (dy.shape != x_.shape) throw DataError("leaky-relu backward: gradient shape mismatch");
  Tensor<T> dx(dy.shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = x_.data[i] > T(0) ? dy.data[i] : slope_ * dy.data[i];
  x_ = Tensor<T>();
  return dx;
}

template <typename T>
json Tanh<T>::describe() const {
  return {{"kind", "tanh"}};
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = std::tanh(x.data[i]);
  y_ = y;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(cached_, kind());
  cached_ = false;
  if (dy.shape != y_.shape) throw DataError("tanh backward: gradient shape mismatch");
  Tensor<T> dx(dy.shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = dy.data[i] * (T(1) - y_.data[i] * y_.data[i]);
  y_ = Tensor<T>();
  return dx;
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const json& desc) {
  try {
    const auto kind = desc.at("kind").get<std::string>();
    if (kind == "conv3x3") return std::make_unique<Conv3x3<T>>(desc.at("in").get<int>(), desc.at("out").get<int>());
    if (kind == "avgpool2x2") return std::make_unique<AvgPool2x2<T>>();
    if (kind == "adaptive-avgpool") {
      return std::make_unique<AdaptiveAvgPool<T>>(desc.at("out_h").get<int>(), desc.at("out_w").get<int>());
    }
    if (kind == "dense") return std::make_unique<Dense<T>>(desc.at("in").get<int>(), desc.at("out").get<int>());
    if (kind == "leaky-relu") return std::make_unique<LeakyReLU<T>>(desc.value("slope", 0.01));
    if (kind == "tanh") return std::make_unique<Tanh<T>>();
    throw DataError("unknown layer kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed layer descriptor: ") + e.what());
  }
}

#define GDCE_INSTANTIATE(T)                                      \
  template class Conv3x3<T>;                                     \
  template class AvgPool2x2<T>;                                  \
  template class AdaptiveAvgPool<T>;                             \
  template class Dense<T>;                                       \
  template class LeakyReLU<T>;                                   \
  template class Tanh<T>;                                        \
  template std::unique_ptr<Layer<T>> make_layer<T>(const json&);

GDCE_INSTANTIATE(float)
GDCE_INSTANTIATE(double)

#undef GDCE_INSTANTIATE

}  // namespace gdce::nn
