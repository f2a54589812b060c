#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "fsenet/common.hpp"

namespace fsenet {

/// Dense row-major tensor. Feature maps and images are rank-3 (H, W, C);
/// convolution weights are rank-4 (KH, KW, CIN, COUT); matrices rank-2.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(T v) { return full({1, 1, 1}, v); }

  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = shape.empty() ? 0 : 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // rank-3 helpers
  int height() const { return shape_[0]; }
  int width() const { return shape_[1]; }
  int channels() const { return shape_[2]; }

  T& at(int y, int x, int c) {
    return data_[(static_cast<size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }
  T at(int y, int x, int c) const {
    return data_[(static_cast<size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }

  // rank-4 helpers (KH, KW, CIN, COUT)
  T& at4(int a, int b, int c, int d) {
    return data_[((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  T at4(int a, int b, int c, int d) const {
    return data_[((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  // rank-2 helpers (ROWS, COLS)
  T& at2(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  T at2(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != numel()) throw ShapeError("reshape changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape_ = shape_;
    out.data_.resize(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) out.data_[i] = static_cast<U>(data_[i]);
    return out;
  }

  T min_value() const {
    T m = data_.empty() ? T(0) : data_[0];
    for (T v : data_) m = std::min(m, v);
    return m;
  }
  T max_value() const {
    T m = data_.empty() ? T(0) : data_[0];
    for (T v : data_) m = std::max(m, v);
    return m;
  }
  double max_abs() const {
    double m = 0;
    for (T v : data_) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
  }
  double mean() const {
    double s = 0;
    for (T v : data_) s += static_cast<double>(v);
    return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
  }
  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

using Image = Tensor<float>;

}  // namespace fsenet
