#pragma once

#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "smcnet/errors.hpp"

namespace smcnet {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor with an optional gradient slot of the same length.
///
/// For complex element types the gradient of a real loss L is stored as
/// dL/dRe + i*dL/dIm, i.e. the gradient of the (Re, Im) decomposition.
template <class E>
struct Tensor {
  Shape shape;
  std::vector<E> data;
  std::vector<E> grad;  // empty when absent

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape)) {}
  Tensor(Shape s, std::vector<E> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape))
      throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                       std::to_string(data.size()) + " values");
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }
  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.assign(data.size(), E{}); }

  E& operator[](std::size_t i) { return data[i]; }
  const E& operator[](std::size_t i) const { return data[i]; }
};

template <class T>
using CTensor = Tensor<std::complex<T>>;
template <class T>
using RTensor = Tensor<T>;

/// Mutable view of one trainable tensor as a flat array of real scalars.
template <class T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

template <class T>
std::span<T> as_reals(std::vector<std::complex<T>>& v) {
  return {reinterpret_cast<T*>(v.data()), v.size() * 2};
}
template <class T>
std::span<const T> as_reals(const std::vector<std::complex<T>>& v) {
  return {reinterpret_cast<const T*>(v.data()), v.size() * 2};
}
template <class T>
std::span<T> as_reals(std::vector<T>& v) {
  return {v.data(), v.size()};
}
template <class T>
std::span<const T> as_reals(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

template <class T>
ParamRef<T> param_ref(const std::string& name, CTensor<T>& t) {
  if (!t.has_grad()) t.zero_grad();
  return {name, as_reals(t.data), as_reals(t.grad)};
}
template <class T>
ParamRef<T> param_ref(const std::string& name, RTensor<T>& t) {
  if (!t.has_grad()) t.zero_grad();
  return {name, as_reals(t.data), as_reals(t.grad)};
}

}  // namespace smcnet
