#pragma once

#include <cmath>

#include "fsenet/tensor.hpp"

namespace fsenet {

/// Normalized 2D Gaussian, odd size.
template <typename T>
Tensor<T> gaussian_kernel2d(int size, double sigma) {
  Tensor<T> k({size, size});
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2 * sigma * sigma));
      k.at2(y, x) = static_cast<T>(v);
      sum += v;
    }
  for (auto& v : k.data_) v = static_cast<T>(static_cast<double>(v) / sum);
  return k;
}

}  // namespace fsenet
