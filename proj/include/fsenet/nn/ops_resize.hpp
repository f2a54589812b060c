#pragma once

#include "fsenet/image.hpp"
#include "fsenet/nn/ops.hpp"
#include "fsenet/pyramid.hpp"

namespace fsenet::nn {

/// Differentiable bilinear resize sharing the half-pixel convention of
/// fsenet::resize_bilinear. Backward scatters grads to the same corners the
/// forward read (serial, to stay deterministic).
template <typename T>
Value<T> resize_bilinear_v(const Value<T>& x, int out_h, int out_w) {
  Tensor<T> out = resize_bilinear(x.tensor(), out_h, out_w);
  const int h = x.height(), w = x.width();
  return make_op<T>(std::move(out), {x}, [h, w, out_h, out_w](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& gx = n.parents[0]->grad_buf();
    const Tensor<T>& go = n.grad;
    const int c = gx.channels();
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      if (fy < 0) fy = 0;
      if (fy > h - 1) fy = h - 1;
      int iy = static_cast<int>(fy);
      if (iy > h - 2) iy = h >= 2 ? h - 2 : 0;
      double wy = fy - iy;
      int iy1 = h >= 2 ? iy + 1 : 0;
      for (int x2 = 0; x2 < out_w; ++x2) {
        double fx = (x2 + 0.5) * sx - 0.5;
        if (fx < 0) fx = 0;
        if (fx > w - 1) fx = w - 1;
        int ix = static_cast<int>(fx);
        if (ix > w - 2) ix = w >= 2 ? w - 2 : 0;
        double wx = fx - ix;
        int ix1 = w >= 2 ? ix + 1 : 0;
        for (int k = 0; k < c; ++k) {
          double g = static_cast<double>(go.at(y, x2, k));
          gx.at(iy, ix, k) += static_cast<T>((1 - wy) * (1 - wx) * g);
          gx.at(iy, ix1, k) += static_cast<T>((1 - wy) * wx * g);
          gx.at(iy1, ix, k) += static_cast<T>(wy * (1 - wx) * g);
          gx.at(iy1, ix1, k) += static_cast<T>(wy * wx * g);
        }
      }
    }
  });
}

/// Adaptive average pooling to a (gh, gw) grid. Cell i covers rows
/// [floor(i*H/gh), ceil((i+1)*H/gh)); every input pixel lands in one cell.
template <typename T>
Value<T> adaptive_avg_pool(const Value<T>& x, int gh, int gw) {
  const int h = x.height(), w = x.width(), c = x.channels();
  check(gh >= 1 && gw >= 1 && gh <= h && gw <= w, "adaptive_avg_pool: grid larger than input");
  Tensor<T> out({gh, gw, c});
  auto lo = [](int i, int n, int g) { return (i * n) / g; };
  auto hi = [](int i, int n, int g) { return ((i + 1) * n + g - 1) / g; };
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      int y0 = lo(gy, h, gh), y1 = hi(gy, h, gh);
      int x0 = lo(gx, w, gw), x1 = hi(gx, w, gw);
      double inv = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
      for (int k = 0; k < c; ++k) {
        double acc = 0;
        for (int y = y0; y < y1; ++y)
          for (int xx = x0; xx < x1; ++xx) acc += static_cast<double>(x.tensor().at(y, xx, k));
        out.at(gy, gx, k) = static_cast<T>(acc * inv);
      }
    }
  return make_op<T>(std::move(out), {x}, [gh, gw, h, w, lo, hi](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    const int c = g.channels();
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        int y0 = lo(gy, h, gh), y1 = hi(gy, h, gh);
        int x0 = lo(gx, w, gw), x1 = hi(gx, w, gw);
        double inv = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
        for (int k = 0; k < c; ++k) {
          double gv = static_cast<double>(n.grad.at(gy, gx, k)) * inv;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) g.at(y, xx, k) += static_cast<T>(gv);
        }
      }
  });
}

namespace pyr_detail {

// Adjoint of one reflect-101 binomial pass along an axis: scatter each
// output's taps back to their folded source indices.
template <typename T>
Tensor<T> blur_adjoint(const Tensor<T>& g, double gain) {
  const int h = g.height(), w = g.width(), c = g.channels();
  Tensor<T> colpass({h, w, c});  // adjoint of the column (second) pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        double gv = static_cast<double>(g.at(y, x, k)) * gain;
        for (int t = -2; t <= 2; ++t)
          colpass.at(reflect_index(y + t, h), x, k) += static_cast<T>(kBinomial[t + 2] * gv);
      }
  Tensor<T> out({h, w, c});  // adjoint of the row (first) pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        double gv = static_cast<double>(colpass.at(y, x, k)) * gain;
        for (int t = -2; t <= 2; ++t)
          out.at(y, reflect_index(x + t, w), k) += static_cast<T>(kBinomial[t + 2] * gv);
      }
  return out;
}

}  // namespace pyr_detail

/// Differentiable PyrUp (zero-insert + 4x binomial blur); the forward path
/// is exactly fsenet::pyr_up, the backward is its adjoint.
template <typename T>
Value<T> pyr_up_v(const Value<T>& x) {
  Tensor<T> out = pyr_up(x.tensor());
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T> folded = pyr_detail::blur_adjoint(n.grad, 2.0);
    Tensor<T>& gx = n.parents[0]->grad_buf();
    for (int y = 0; y < gx.height(); ++y)
      for (int x = 0; x < gx.width(); ++x)
        for (int k = 0; k < gx.channels(); ++k) gx.at(y, x, k) += folded.at(2 * y, 2 * x, k);
  });
}

}  // namespace fsenet::nn
