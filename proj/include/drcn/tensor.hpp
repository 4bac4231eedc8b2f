#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "drcn/error.hpp"

namespace drcn {

inline std::string shape_str(const std::vector<std::size_t>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ", ";
    os << dims[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor. Value semantics throughout: ops take const refs and
// return fresh tensors; training code reuses buffers only where it owns them.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(checked_volume(shape_), T{}) {}

  TensorT(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_volume(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not fill shape " + shape_str(shape_));
    }
  }

  static TensorT full(std::vector<std::size_t> shape, T value) {
    TensorT t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_str(shape_));
    }
    return shape_[axis];
  }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  // Multi-index access; rank is checked once per call, bounds are not (hot path).
  template <typename... Ix>
  T& operator()(Ix... ix) {
    return data_[offset_of(ix...)];
  }
  template <typename... Ix>
  const T& operator()(Ix... ix) const {
    return data_[offset_of(ix...)];
  }

  // Reinterpret the same data under a new shape (row-major order preserved).
  TensorT reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_volume(new_shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " +
                           shape_str(new_shape) + ": element counts differ");
    }
    return TensorT(std::move(new_shape), data_);
  }

 private:
  template <typename... Ix>
  std::size_t offset_of(Ix... ix) const {
    if (sizeof...(Ix) != shape_.size()) {
      throw DimensionError("index rank " + std::to_string(sizeof...(Ix)) +
                           " does not match tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t idx[] = {static_cast<std::size_t>(ix)...};
    std::size_t flat = 0;
    for (std::size_t a = 0; a < sizeof...(Ix); ++a) flat = flat * shape_[a] + idx[a];
    return flat;
  }

  static std::size_t checked_volume(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw DimensionError("zero-sized axis in shape " + shape_str(shape));
      n *= d;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<double>;
using IndexTensor = TensorT<std::int64_t>;

// C = A · B for 2-d operands [n,k] x [k,p]. The k-loop sits in the middle so
// every output element accumulates in a fixed ascending-k order: the compiler
// can vectorize the j loop without reassociating the sum, which keeps results
// bit-stable run to run.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul needs rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor c({n, p});
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = C + i * p;
    const double* arow = A + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = arow[t];
      const double* brow = B + t * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose2d needs a rank-2 tensor, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(0), m = a.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = a(i, j);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename F>
Tensor map_elementwise(const Tensor& t, F&& f) {
  Tensor out = t;
  for (auto& v : out.data()) v = f(v);
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d < 0) d = -d;
    if (d > m) m = d;
  }
  return m;
}

}  // namespace drcn
