#pragma once

#include <vector>

#include "fsenet/image.hpp"
#include "fsenet/tensor.hpp"

namespace fsenet {

// The classic 5-tap binomial kernel. Rows sum to 1, so constants are fixed
// points of the blur; with reflect-101 borders this holds exactly at edges.
inline constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

namespace detail {

// Separable binomial blur with reflect-101 borders, accumulated in double so
// constant inputs survive bit-for-bit after the final rounding. `gain` is
// applied per pass (pyr_up uses 2 per axis to undo zero insertion).
template <typename T>
Tensor<T> binomial_blur(const Tensor<T>& img, double gain) {
  const int h = img.height(), w = img.width(), c = img.channels();
  Tensor<T> tmp({h, w, c});
  parallel_for(h, [&](int64_t y0, int64_t y1) {
    for (int64_t y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < c; ++k) {
          double s = 0;
          for (int t = -2; t <= 2; ++t)
            s += kBinomial[t + 2] * static_cast<double>(img.at(static_cast<int>(y), reflect_index(x + t, w), k));
          tmp.at(static_cast<int>(y), x, k) = static_cast<T>(s * gain);
        }
  });
  Tensor<T> out({h, w, c});
  parallel_for(h, [&](int64_t y0, int64_t y1) {
    for (int64_t y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < c; ++k) {
          double s = 0;
          for (int t = -2; t <= 2; ++t)
            s += kBinomial[t + 2] * static_cast<double>(tmp.at(reflect_index(static_cast<int>(y) + t, h), x, k));
          out.at(static_cast<int>(y), x, k) = static_cast<T>(s * gain);
        }
  });
  return out;
}

}  // namespace detail

/// Blur with the 5x5 binomial kernel and keep every second pixel. Dims must
/// be even; callers pad first.
template <typename T>
Tensor<T> pyr_down(const Tensor<T>& img) {
  if (img.height() % 2 != 0 || img.width() % 2 != 0)
    throw ShapeError("pyr_down requires even dims, got " + img.shape_str());
  Tensor<T> blurred = detail::binomial_blur(img, 1.0);
  Tensor<T> out({img.height() / 2, img.width() / 2, img.channels()});
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = blurred.at(2 * y, 2 * x, c);
  return out;
}

/// Zero-insert to double the dims, then blur with 4x the binomial kernel so
/// constants map to constants.
template <typename T>
Tensor<T> pyr_up(const Tensor<T>& img) {
  Tensor<T> z({img.height() * 2, img.width() * 2, img.channels()});
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) z.at(2 * y, 2 * x, c) = img.at(y, x, c);
  return detail::binomial_blur(z, 2.0);
}

/// D high-frequency bands (descending resolution) plus the low base.
template <typename T>
struct LaplacianStack {
  std::vector<Tensor<T>> highs;
  Tensor<T> low;
  int depth() const { return static_cast<int>(highs.size()); }
};

template <typename T>
LaplacianStack<T> decompose(const Tensor<T>& img, int depth) {
  if (depth < 1) throw ShapeError("decompose: depth must be >= 1");
  int div = 1 << depth;
  if (img.height() % div != 0 || img.width() % div != 0)
    throw ShapeError("decompose: dims " + img.shape_str() + " not divisible by 2^" +
                     std::to_string(depth));
  LaplacianStack<T> stack;
  Tensor<T> cur = img;
  for (int i = 0; i < depth; ++i) {
    Tensor<T> down = pyr_down(cur);
    Tensor<T> up = pyr_up(down);
    Tensor<T> band({cur.height(), cur.width(), cur.channels()});
    for (int64_t j = 0; j < cur.numel(); ++j) band.data()[j] = cur.data()[j] - up.data()[j];
    stack.highs.push_back(std::move(band));
    cur = std::move(down);
  }
  stack.low = std::move(cur);
  return stack;
}

template <typename T>
Tensor<T> reconstruct(const LaplacianStack<T>& stack) {
  Tensor<T> cur = stack.low;
  for (int i = stack.depth() - 1; i >= 0; --i) {
    const Tensor<T>& band = stack.highs[static_cast<size_t>(i)];
    Tensor<T> up = pyr_up(cur);
    if (!up.same_shape(band))
      throw ShapeError("reconstruct: band " + std::to_string(i) + " dims " + band.shape_str() +
                       " do not match upsampled base " + up.shape_str());
    for (int64_t j = 0; j < up.numel(); ++j) up.data()[j] += band.data()[j];
    cur = std::move(up);
  }
  return cur;
}

}  // namespace fsenet
