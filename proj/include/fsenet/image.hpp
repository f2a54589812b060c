#pragma once

#include "fsenet/tensor.hpp"

namespace fsenet {

/// Reflect-101 index fold: -1 -> 1, n -> n-2. Handles arbitrary overshoot by
/// repeated reflection; a 1-wide axis degenerates to index 0.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n - 2;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

/// Records how an image was padded so the exact inverse crop is recoverable.
struct PadSpec {
  int top = 0, bottom = 0, left = 0, right = 0;
  bool replicate = false;  // reflect everywhere unless an axis was < 2 px
  bool any() const { return top || bottom || left || right; }
};

template <typename T>
Tensor<T> pad_edges(const Tensor<T>& img, const PadSpec& p) {
  const int h = img.height(), w = img.width(), c = img.channels();
  Tensor<T> out({h + p.top + p.bottom, w + p.left + p.right, c});
  for (int y = 0; y < out.height(); ++y) {
    int sy = p.replicate ? clamp_index(y - p.top, h) : reflect_index(y - p.top, h);
    for (int x = 0; x < out.width(); ++x) {
      int sx = p.replicate ? clamp_index(x - p.left, w) : reflect_index(x - p.left, w);
      for (int k = 0; k < c; ++k) out.at(y, x, k) = img.at(sy, sx, k);
    }
  }
  return out;
}

/// Pads bottom/right with reflect borders until both dims are multiples of
/// `factor`. Axes narrower than 2 px fall back to replicate padding.
template <typename T>
std::pair<Tensor<T>, PadSpec> pad_to_multiple(const Tensor<T>& img, int factor) {
  if (factor < 1) throw ShapeError("pad_to_multiple: factor must be >= 1");
  const int h = img.height(), w = img.width();
  PadSpec p;
  p.bottom = (factor - h % factor) % factor;
  p.right = (factor - w % factor) % factor;
  p.replicate = (h < 2 && p.bottom > 0) || (w < 2 && p.right > 0);
  if (!p.any()) return {img, p};
  return {pad_edges(img, p), p};
}

template <typename T>
Tensor<T> crop_region(const Tensor<T>& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width())
    throw ShapeError("crop_region out of bounds");
  Tensor<T> out({h, w, img.channels()});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& img, const PadSpec& p) {
  return crop_region(img, p.top, p.left, img.height() - p.top - p.bottom,
                     img.width() - p.left - p.right);
}

/// Bilinear resize with half-pixel sample centers (the source coordinate of
/// output pixel x is (x + 0.5) * inW/outW - 0.5, clamped to the image).
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: target dims must be >= 1");
  const int h = img.height(), w = img.width(), c = img.channels();
  Tensor<T> out({out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  parallel_for(out_h, [&](int64_t y0, int64_t y1) {
    for (int64_t y = y0; y < y1; ++y) {
      double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      if (fy < 0) fy = 0;
      if (fy > h - 1) fy = h - 1;
      int iy = static_cast<int>(fy);
      if (iy > h - 2) iy = h >= 2 ? h - 2 : 0;
      double wy = fy - iy;
      int iy1 = h >= 2 ? iy + 1 : 0;
      for (int x = 0; x < out_w; ++x) {
        double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
        if (fx < 0) fx = 0;
        if (fx > w - 1) fx = w - 1;
        int ix = static_cast<int>(fx);
        if (ix > w - 2) ix = w >= 2 ? w - 2 : 0;
        double wx = fx - ix;
        int ix1 = w >= 2 ? ix + 1 : 0;
        for (int k = 0; k < c; ++k) {
          double v00 = img.at(iy, ix, k), v01 = img.at(iy, ix1, k);
          double v10 = img.at(iy1, ix, k), v11 = img.at(iy1, ix1, k);
          out.at(static_cast<int>(y), x, k) =
              static_cast<T>((1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> clamp01(Tensor<T> img) {
  for (auto& v : img.data_) v = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
  return img;
}

}  // namespace fsenet
