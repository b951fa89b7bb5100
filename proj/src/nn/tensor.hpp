#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace gdce::nn {

// Eigen picks its vectorized code path from pointer alignment, which changes
// the floating-point summation order. Fixed 64-byte alignment keeps results
// independent of heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

// NCHW; dense activations use (n, features, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t per_sample() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(s.numel(), T(0)) {}
  Tensor(Shape s, Buffer<T> d);
  Tensor(Shape s, const std::vector<T>& d);

  std::size_t size() const { return data.size(); }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * shape.per_sample(); }
  const T* sample(int i) const {
    return data.data() + static_cast<std::size_t>(i) * shape.per_sample();
  }
};

// Throws DataError when the buffer length disagrees with the shape.
void check_tensor_size(const Shape& s, std::size_t len);

template <typename T>
Tensor<T>::Tensor(Shape s, Buffer<T> d) : shape(s), data(std::move(d)) {
  check_tensor_size(shape, data.size());
}

template <typename T>
Tensor<T>::Tensor(Shape s, const std::vector<T>& d) : shape(s), data(d.begin(), d.end()) {
  check_tensor_size(shape, data.size());
}

// Throws NumericalError naming `where` if any value is NaN or infinite.
template <typename T>
void check_finite(std::span<const T> v, const std::string& where);

}  // namespace gdce::nn
