#pragma once

#include <cmath>

#include "fsenet/nn/ops.hpp"

namespace fsenet::nn {

struct ConvSpec {
  int stride = 1;
  int dilation = 1;
  int pad = 0;  // zero padding, symmetric
};

inline int conv_out_dim(int n, int k, const ConvSpec& s) {
  int eff = (k - 1) * s.dilation + 1;
  return (n + 2 * s.pad - eff) / s.stride + 1;
}

/// Dense 2D convolution. x: (H,W,CIN); w: (KH,KW,CIN,COUT); optional bias
/// (1,1,COUT). Zero padding. Forward parallelises over output rows; both
/// backward passes are gather-style so results are thread-count invariant.
template <typename T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, ConvSpec spec = {}) {
  const Tensor<T>& xt = x.tensor();
  const Tensor<T>& wt = w.tensor();
  check(wt.rank() == 4, "conv2d: weight must be rank-4");
  const int kh = wt.dim(0), kw = wt.dim(1), cin = wt.dim(2), cout = wt.dim(3);
  check(xt.channels() == cin, "conv2d: input channels " + std::to_string(xt.channels()) +
                                  " != weight cin " + std::to_string(cin));
  if (b.defined()) check(b.tensor().numel() == cout, "conv2d: bias size mismatch");
  const int h = xt.height(), wd = xt.width();
  const int oh = conv_out_dim(h, kh, spec), ow = conv_out_dim(wd, kw, spec);
  check(oh >= 1 && ow >= 1, "conv2d: output would be empty");

  Tensor<T> out({oh, ow, cout});
  const T* bv = b.defined() ? b.tensor().data() : nullptr;
  parallel_for(oh, [&](int64_t y0, int64_t y1) {
    std::vector<double> acc(static_cast<size_t>(cout));
    for (int64_t oy = y0; oy < y1; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int o = 0; o < cout; ++o) acc[static_cast<size_t>(o)] = bv ? static_cast<double>(bv[o]) : 0.0;
        for (int ky = 0; ky < kh; ++ky) {
          int iy = static_cast<int>(oy) * spec.stride - spec.pad + ky * spec.dilation;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = ox * spec.stride - spec.pad + kx * spec.dilation;
            if (ix < 0 || ix >= wd) continue;
            const T* xrow = &xt.data()[(static_cast<size_t>(iy) * wd + ix) * cin];
            const T* wrow = &wt.data()[(static_cast<size_t>(ky) * kw + kx) * cin * cout];
            for (int i = 0; i < cin; ++i) {
              double xv = static_cast<double>(xrow[i]);
              const T* wp = wrow + static_cast<size_t>(i) * cout;
              for (int o = 0; o < cout; ++o) acc[static_cast<size_t>(o)] += xv * static_cast<double>(wp[o]);
            }
          }
        }
        T* orow = &out.data()[(static_cast<size_t>(oy) * ow + ox) * cout];
        for (int o = 0; o < cout; ++o) orow[o] = static_cast<T>(acc[static_cast<size_t>(o)]);
      }
    }
  });

  std::vector<Value<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [spec, kh, kw, cin, cout, h, wd, oh, ow](Node<T>& n) {
    const Tensor<T>& xt2 = n.parents[0]->value;
    const Tensor<T>& wt2 = n.parents[1]->value;
    const Tensor<T>& go = n.grad;
    // d/dx: gather over kernel taps and output channels.
    if (n.parents[0]->requires_grad) {
      Tensor<T>& gx = n.parents[0]->grad_buf();
      parallel_for(h, [&](int64_t r0, int64_t r1) {
        for (int64_t iy = r0; iy < r1; ++iy)
          for (int ix = 0; ix < wd; ++ix) {
            T* gxp = &gx.data()[(static_cast<size_t>(iy) * wd + ix) * cin];
            for (int ky = 0; ky < kh; ++ky) {
              int num_y = static_cast<int>(iy) + spec.pad - ky * spec.dilation;
              if (num_y < 0 || num_y % spec.stride) continue;
              int oy = num_y / spec.stride;
              if (oy >= oh) continue;
              for (int kx = 0; kx < kw; ++kx) {
                int num_x = ix + spec.pad - kx * spec.dilation;
                if (num_x < 0 || num_x % spec.stride) continue;
                int ox = num_x / spec.stride;
                if (ox >= ow) continue;
                const T* gop = &go.data()[(static_cast<size_t>(oy) * ow + ox) * cout];
                const T* wrow = &wt2.data()[(static_cast<size_t>(ky) * kw + kx) * cin * cout];
                for (int i = 0; i < cin; ++i) {
                  double acc = 0;
                  const T* wp = wrow + static_cast<size_t>(i) * cout;
                  for (int o = 0; o < cout; ++o) acc += static_cast<double>(wp[o]) * static_cast<double>(gop[o]);
                  gxp[i] += static_cast<T>(acc);
                }
              }
            }
          }
      });
    }
    // d/dw: gather over output pixels per weight coordinate.
    if (n.parents[1]->requires_grad) {
      Tensor<T>& gw = n.parents[1]->grad_buf();
      parallel_for(static_cast<int64_t>(kh) * kw, [&](int64_t t0, int64_t t1) {
        for (int64_t t = t0; t < t1; ++t) {
          int ky = static_cast<int>(t) / kw, kx = static_cast<int>(t) % kw;
          for (int i = 0; i < cin; ++i) {
            std::vector<double> acc(static_cast<size_t>(cout), 0.0);
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * spec.stride - spec.pad + ky * spec.dilation;
              if (iy < 0 || iy >= h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                int ix = ox * spec.stride - spec.pad + kx * spec.dilation;
                if (ix < 0 || ix >= wd) continue;
                double xv = static_cast<double>(xt2.data()[(static_cast<size_t>(iy) * wd + ix) * cin + i]);
                const T* gop = &go.data()[(static_cast<size_t>(oy) * ow + ox) * cout];
                for (int o = 0; o < cout; ++o) acc[static_cast<size_t>(o)] += xv * static_cast<double>(gop[o]);
              }
            }
            T* gwp = &gw.data()[((static_cast<size_t>(ky) * kw + kx) * cin + i) * cout];
            for (int o = 0; o < cout; ++o) gwp[o] += static_cast<T>(acc[static_cast<size_t>(o)]);
          }
        }
      });
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T>& gb = n.parents[2]->grad_buf();
      for (int o = 0; o < cout; ++o) {
        double acc = 0;
        for (int64_t p = 0; p < static_cast<int64_t>(oh) * ow; ++p)
          acc += static_cast<double>(go.data()[p * cout + o]);
        gb.data()[o] += static_cast<T>(acc);
      }
    }
  });
}

/// Depth-wise convolution: w (KH,KW,C), one filter per channel.
template <typename T>
Value<T> depthwise_conv(const Value<T>& x, const Value<T>& w, const Value<T>& b, ConvSpec spec = {}) {
  const Tensor<T>& xt = x.tensor();
  const Tensor<T>& wt = w.tensor();
  check(wt.rank() == 3 && wt.channels() == xt.channels(), "depthwise_conv: weight must be (KH,KW,C)");
  const int kh = wt.dim(0), kw = wt.dim(1), c = xt.channels();
  if (b.defined()) check(b.tensor().numel() == c, "depthwise_conv: bias size mismatch");
  const int h = xt.height(), wd = xt.width();
  const int oh = conv_out_dim(h, kh, spec), ow = conv_out_dim(wd, kw, spec);
  check(oh >= 1 && ow >= 1, "depthwise_conv: output would be empty");

  Tensor<T> out({oh, ow, c});
  const T* bv = b.defined() ? b.tensor().data() : nullptr;
  parallel_for(oh, [&](int64_t y0, int64_t y1) {
    std::vector<double> acc(static_cast<size_t>(c));
    for (int64_t oy = y0; oy < y1; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        for (int k = 0; k < c; ++k) acc[static_cast<size_t>(k)] = bv ? static_cast<double>(bv[k]) : 0.0;
        for (int ky = 0; ky < kh; ++ky) {
          int iy = static_cast<int>(oy) * spec.stride - spec.pad + ky * spec.dilation;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = ox * spec.stride - spec.pad + kx * spec.dilation;
            if (ix < 0 || ix >= wd) continue;
            const T* xrow = &xt.data()[(static_cast<size_t>(iy) * wd + ix) * c];
            const T* wrow = &wt.data()[(static_cast<size_t>(ky) * kw + kx) * c];
            for (int k = 0; k < c; ++k) acc[static_cast<size_t>(k)] += static_cast<double>(xrow[k]) * static_cast<double>(wrow[k]);
          }
        }
        T* orow = &out.data()[(static_cast<size_t>(oy) * ow + ox) * c];
        for (int k = 0; k < c; ++k) orow[k] = static_cast<T>(acc[static_cast<size_t>(k)]);
      }
  });

  std::vector<Value<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [spec, kh, kw, c, h, wd, oh, ow](Node<T>& n) {
    const Tensor<T>& xt2 = n.parents[0]->value;
    const Tensor<T>& wt2 = n.parents[1]->value;
    const Tensor<T>& go = n.grad;
    if (n.parents[0]->requires_grad) {
      Tensor<T>& gx = n.parents[0]->grad_buf();
      parallel_for(h, [&](int64_t r0, int64_t r1) {
        for (int64_t iy = r0; iy < r1; ++iy)
          for (int ix = 0; ix < wd; ++ix) {
            T* gxp = &gx.data()[(static_cast<size_t>(iy) * wd + ix) * c];
            for (int ky = 0; ky < kh; ++ky) {
              int num_y = static_cast<int>(iy) + spec.pad - ky * spec.dilation;
              if (num_y < 0 || num_y % spec.stride) continue;
              int oy = num_y / spec.stride;
              if (oy >= oh) continue;
              for (int kx = 0; kx < kw; ++kx) {
                int num_x = ix + spec.pad - kx * spec.dilation;
                if (num_x < 0 || num_x % spec.stride) continue;
                int ox = num_x / spec.stride;
                if (ox >= ow) continue;
                const T* gop = &go.data()[(static_cast<size_t>(oy) * ow + ox) * c];
                const T* wrow = &wt2.data()[(static_cast<size_t>(ky) * kw + kx) * c];
                for (int k = 0; k < c; ++k) gxp[k] += wrow[k] * gop[k];
              }
            }
          }
      });
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& gw = n.parents[1]->grad_buf();
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          std::vector<double> acc(static_cast<size_t>(c), 0.0);
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * spec.stride - spec.pad + ky * spec.dilation;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * spec.stride - spec.pad + kx * spec.dilation;
              if (ix < 0 || ix >= wd) continue;
              const T* xrow = &xt2.data()[(static_cast<size_t>(iy) * wd + ix) * c];
              const T* gop = &go.data()[(static_cast<size_t>(oy) * ow + ox) * c];
              for (int k = 0; k < c; ++k) acc[static_cast<size_t>(k)] += static_cast<double>(xrow[k]) * static_cast<double>(gop[k]);
            }
          }
          T* gwp = &gw.data()[(static_cast<size_t>(ky) * kw + kx) * c];
          for (int k = 0; k < c; ++k) gwp[k] += static_cast<T>(acc[static_cast<size_t>(k)]);
        }
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T>& gb = n.parents[2]->grad_buf();
      for (int k = 0; k < c; ++k) {
        double acc = 0;
        for (int64_t p = 0; p < static_cast<int64_t>(oh) * ow; ++p)
          acc += static_cast<double>(go.data()[p * c + k]);
        gb.data()[k] += static_cast<T>(acc);
      }
    }
  });
}

/// Valid-mode depth-wise filtering with a fixed (non-learned) 2D kernel,
/// applied to every channel. Used by the SSIM loss windows.
template <typename T>
Value<T> fixed_blur_valid(const Value<T>& x, const Tensor<T>& kernel) {
  check(kernel.rank() == 2, "fixed_blur_valid: kernel must be rank-2");
  const int kh = kernel.dim(0), kw = kernel.dim(1);
  const int h = x.height(), wd = x.width(), c = x.channels();
  check(h >= kh && wd >= kw, "fixed_blur_valid: image smaller than kernel");
  const int oh = h - kh + 1, ow = wd - kw + 1;
  Tensor<T> out({oh, ow, c});
  const Tensor<T>& xt = x.tensor();
  parallel_for(oh, [&](int64_t y0, int64_t y1) {
    std::vector<double> acc(static_cast<size_t>(c));
    for (int64_t oy = y0; oy < y1; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            double kv = static_cast<double>(kernel.at2(ky, kx));
            const T* xrow = &xt.data()[((static_cast<size_t>(oy) + ky) * wd + ox + kx) * c];
            for (int k = 0; k < c; ++k) acc[static_cast<size_t>(k)] += kv * static_cast<double>(xrow[k]);
          }
        T* orow = &out.data()[(static_cast<size_t>(oy) * ow + ox) * c];
        for (int k = 0; k < c; ++k) orow[k] = static_cast<T>(acc[static_cast<size_t>(k)]);
      }
  });
  Tensor<T> kcopy = kernel;
  return make_op<T>(std::move(out), {x}, [kcopy, kh, kw, oh, ow](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& gx = n.parents[0]->grad_buf();
    const Tensor<T>& go = n.grad;
    const int h2 = gx.height(), w2 = gx.width(), c2 = gx.channels();
    parallel_for(h2, [&](int64_t r0, int64_t r1) {
      for (int64_t iy = r0; iy < r1; ++iy)
        for (int ix = 0; ix < w2; ++ix) {
          T* gxp = &gx.data()[(static_cast<size_t>(iy) * w2 + ix) * c2];
          for (int ky = 0; ky < kh; ++ky) {
            int oy = static_cast<int>(iy) - ky;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ox = ix - kx;
              if (ox < 0 || ox >= ow) continue;
              double kv = static_cast<double>(kcopy.at2(ky, kx));
              const T* gop = &go.data()[(static_cast<size_t>(oy) * ow + ox) * c2];
              for (int k = 0; k < c2; ++k) gxp[k] += static_cast<T>(kv * static_cast<double>(gop[k]));
            }
          }
        }
    });
  });
}

// ---------------------------------------------------------------------------
// Modulated deformable 3x3 convolution (stride 1, pad 1). The sampling grid
// of each tap is displaced by learned offsets and scaled by a modulation
// factor; values are bilinearly interpolated, with out-of-image corners
// contributing zero. `om` packs per-position [9 x (dy,dx), 9 mask logits];
// modulation is 2*sigmoid(logit) so a zero-initialised predictor starts as
// an ordinary convolution.

namespace deform_detail {

template <typename T>
inline double bilinear(const Tensor<T>& x, int c, double py, double px) {
  const int h = x.height(), w = x.width();
  if (py <= -1 || py >= h || px <= -1 || px >= w) return 0.0;
  int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
  double ly = py - y0, lx = px - x0;
  double v = 0;
  if (y0 >= 0 && x0 >= 0) v += (1 - ly) * (1 - lx) * static_cast<double>(x.at(y0, x0, c));
  if (y0 >= 0 && x0 + 1 <= w - 1) v += (1 - ly) * lx * static_cast<double>(x.at(y0, x0 + 1, c));
  if (y0 + 1 <= h - 1 && x0 >= 0) v += ly * (1 - lx) * static_cast<double>(x.at(y0 + 1, x0, c));
  if (y0 + 1 <= h - 1 && x0 + 1 <= w - 1) v += ly * lx * static_cast<double>(x.at(y0 + 1, x0 + 1, c));
  return v;
}

// d(sample)/d(py) and d(sample)/d(px)
template <typename T>
inline void bilinear_coord_grad(const Tensor<T>& x, int c, double py, double px, double& dy, double& dx) {
  dy = dx = 0;
  const int h = x.height(), w = x.width();
  if (py <= -1 || py >= h || px <= -1 || px >= w) return;
  int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
  double ly = py - y0, lx = px - x0;
  double v00 = (y0 >= 0 && x0 >= 0) ? static_cast<double>(x.at(y0, x0, c)) : 0.0;
  double v01 = (y0 >= 0 && x0 + 1 <= w - 1) ? static_cast<double>(x.at(y0, x0 + 1, c)) : 0.0;
  double v10 = (y0 + 1 <= h - 1 && x0 >= 0) ? static_cast<double>(x.at(y0 + 1, x0, c)) : 0.0;
  double v11 = (y0 + 1 <= h - 1 && x0 + 1 <= w - 1) ? static_cast<double>(x.at(y0 + 1, x0 + 1, c)) : 0.0;
  dy = (1 - lx) * (v10 - v00) + lx * (v11 - v01);
  dx = (1 - ly) * (v01 - v00) + ly * (v11 - v10);
}

// Scatter helper for d/dinput.
template <typename T>
inline void bilinear_scatter(Tensor<T>& gx, int c, double py, double px, double g) {
  const int h = gx.height(), w = gx.width();
  if (py <= -1 || py >= h || px <= -1 || px >= w) return;
  int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
  double ly = py - y0, lx = px - x0;
  if (y0 >= 0 && x0 >= 0) gx.at(y0, x0, c) += static_cast<T>((1 - ly) * (1 - lx) * g);
  if (y0 >= 0 && x0 + 1 <= w - 1) gx.at(y0, x0 + 1, c) += static_cast<T>((1 - ly) * lx * g);
  if (y0 + 1 <= h - 1 && x0 >= 0) gx.at(y0 + 1, x0, c) += static_cast<T>(ly * (1 - lx) * g);
  if (y0 + 1 <= h - 1 && x0 + 1 <= w - 1) gx.at(y0 + 1, x0 + 1, c) += static_cast<T>(ly * lx * g);
}

}  // namespace deform_detail

template <typename T>
Value<T> deform_conv3x3(const Value<T>& x, const Value<T>& om, const Value<T>& w, const Value<T>& b) {
  const Tensor<T>& xt = x.tensor();
  const Tensor<T>& wt = w.tensor();
  const int h = xt.height(), wd = xt.width(), cin = xt.channels();
  check(wt.rank() == 4 && wt.dim(0) == 3 && wt.dim(1) == 3 && wt.dim(2) == cin,
        "deform_conv3x3: weight must be (3,3,CIN,COUT)");
  const int cout = wt.dim(3);
  check(om.height() == h && om.width() == wd && om.channels() == 27,
        "deform_conv3x3: offset/mask map must be (H,W,27)");
  if (b.defined()) check(b.tensor().numel() == cout, "deform_conv3x3: bias size mismatch");

  const Tensor<T>& omt = om.tensor();
  Tensor<T> out({h, wd, cout});
  const T* bv = b.defined() ? b.tensor().data() : nullptr;
  auto modulation = [](double logit) { return 2.0 / (1.0 + std::exp(-logit)); };

  parallel_for(h, [&](int64_t y0, int64_t y1) {
    std::vector<double> acc(static_cast<size_t>(cout));
    for (int64_t oy = y0; oy < y1; ++oy)
      for (int ox = 0; ox < wd; ++ox) {
        for (int o = 0; o < cout; ++o) acc[static_cast<size_t>(o)] = bv ? static_cast<double>(bv[o]) : 0.0;
        const T* omp = &omt.data()[(static_cast<size_t>(oy) * wd + ox) * 27];
        for (int t = 0; t < 9; ++t) {
          int ky = t / 3, kx = t % 3;
          double py = static_cast<double>(oy) - 1 + ky + static_cast<double>(omp[2 * t]);
          double px = static_cast<double>(ox) - 1 + kx + static_cast<double>(omp[2 * t + 1]);
          double m = modulation(static_cast<double>(omp[18 + t]));
          for (int i = 0; i < cin; ++i) {
            double v = deform_detail::bilinear(xt, i, py, px) * m;
            const T* wp = &wt.data()[((static_cast<size_t>(ky) * 3 + kx) * cin + i) * cout];
            for (int o = 0; o < cout; ++o) acc[static_cast<size_t>(o)] += v * static_cast<double>(wp[o]);
          }
        }
        T* orow = &out.data()[(static_cast<size_t>(oy) * wd + ox) * cout];
        for (int o = 0; o < cout; ++o) orow[o] = static_cast<T>(acc[static_cast<size_t>(o)]);
      }
  });

  std::vector<Value<T>> parents{x, om, w};
  if (b.defined()) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [h, wd, cin, cout, modulation](Node<T>& n) {
    const Tensor<T>& xt2 = n.parents[0]->value;
    const Tensor<T>& omt2 = n.parents[1]->value;
    const Tensor<T>& wt2 = n.parents[2]->value;
    const Tensor<T>& go = n.grad;
    Tensor<T>* gx = n.parents[0]->requires_grad ? &n.parents[0]->grad_buf() : nullptr;
    Tensor<T>* gom = n.parents[1]->requires_grad ? &n.parents[1]->grad_buf() : nullptr;
    Tensor<T>* gw = n.parents[2]->requires_grad ? &n.parents[2]->grad_buf() : nullptr;
    Tensor<T>* gb = (n.parents.size() > 3 && n.parents[3]->requires_grad) ? &n.parents[3]->grad_buf() : nullptr;

    // Serial over positions: d/dx is a scatter with arbitrary targets.
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < wd; ++ox) {
        const T* omp = &omt2.data()[(static_cast<size_t>(oy) * wd + ox) * 27];
        const T* gop = &go.data()[(static_cast<size_t>(oy) * wd + ox) * cout];
        for (int t = 0; t < 9; ++t) {
          int ky = t / 3, kx = t % 3;
          double py = static_cast<double>(oy) - 1 + ky + static_cast<double>(omp[2 * t]);
          double px = static_cast<double>(ox) - 1 + kx + static_cast<double>(omp[2 * t + 1]);
          double logit = static_cast<double>(omp[18 + t]);
          double m = modulation(logit);
          double dmask_acc = 0, dpy_acc = 0, dpx_acc = 0;
          for (int i = 0; i < cin; ++i) {
            const T* wp = &wt2.data()[((static_cast<size_t>(ky) * 3 + kx) * cin + i) * cout];
            double gsum = 0;
            for (int o = 0; o < cout; ++o) gsum += static_cast<double>(wp[o]) * static_cast<double>(gop[o]);
            double v = deform_detail::bilinear(xt2, i, py, px);
            if (gw) {
              T* gwp = &gw->data()[((static_cast<size_t>(ky) * 3 + kx) * cin + i) * cout];
              for (int o = 0; o < cout; ++o)
                gwp[o] += static_cast<T>(v * m * static_cast<double>(gop[o]));
            }
            if (gom) {
              dmask_acc += gsum * v;
              double dy, dx;
              deform_detail::bilinear_coord_grad(xt2, i, py, px, dy, dx);
              dpy_acc += gsum * m * dy;
              dpx_acc += gsum * m * dx;
            }
            if (gx) deform_detail::bilinear_scatter(*gx, i, py, px, gsum * m);
          }
          if (gom) {
            T* gomp = &gom->data()[(static_cast<size_t>(oy) * wd + ox) * 27];
            gomp[2 * t] += static_cast<T>(dpy_acc);
            gomp[2 * t + 1] += static_cast<T>(dpx_acc);
            double sig = m / 2.0;
            gomp[18 + t] += static_cast<T>(dmask_acc * 2.0 * sig * (1.0 - sig));
          }
        }
        if (gb)
          for (int o = 0; o < cout; ++o) gb->data()[o] += gop[o];
      }
  });
}

}  // namespace fsenet::nn
