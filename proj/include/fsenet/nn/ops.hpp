#pragma once

#include <cmath>
#include <vector>

#include "fsenet/nn/autograd.hpp"

namespace fsenet::nn {

template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  check(a.tensor().same_shape(b.tensor()), "add: shape mismatch " + a.tensor().shape_str() + " vs " + b.tensor().shape_str());
  Tensor<T> out = a.tensor();
  const T* pb = b.tensor().data();
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] += pb[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (int pi = 0; pi < 2; ++pi) {
      auto& p = *n.parents[pi];
      if (!p.requires_grad) continue;
      Tensor<T>& g = p.grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i];
    }
  });
}

template <typename T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
  check(a.tensor().same_shape(b.tensor()), "sub: shape mismatch");
  Tensor<T> out = a.tensor();
  const T* pb = b.tensor().data();
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] -= pb[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] -= n.grad.data()[i];
    }
  });
}

template <typename T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
  check(a.tensor().same_shape(b.tensor()), "mul: shape mismatch " + a.tensor().shape_str() + " vs " + b.tensor().shape_str());
  Tensor<T> out = a.tensor();
  const T* pb = b.tensor().data();
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] *= pb[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const T* av = n.parents[0]->value.data();
    const T* bv = n.parents[1]->value.data();
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i] * av[i];
    }
  });
}

template <typename T>
Value<T> div(const Value<T>& a, const Value<T>& b) {
  check(a.tensor().same_shape(b.tensor()), "div: shape mismatch");
  Tensor<T> out = a.tensor();
  const T* pb = b.tensor().data();
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] /= pb[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const T* bv = n.parents[1]->value.data();
    const T* ov = n.value.data();
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i] / bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] -= n.grad.data()[i] * ov[i] / bv[i];
    }
  });
}

template <typename T>
Value<T> scale(const Value<T>& a, double s) {
  Tensor<T> out = a.tensor();
  for (auto& v : out.data_) v = static_cast<T>(v * s);
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += static_cast<T>(n.grad.data()[i] * s);
  });
}

template <typename T>
Value<T> add_scalar(const Value<T>& a, double s) {
  Tensor<T> out = a.tensor();
  for (auto& v : out.data_) v = static_cast<T>(v + s);
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i];
  });
}

template <typename T>
Value<T> sigmoid(const Value<T>& a) {
  Tensor<T> out = a.tensor();
  for (auto& v : out.data_) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    const T* ov = n.value.data();
    for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i] * ov[i] * (T(1) - ov[i]);
  });
}

template <typename T>
Value<T> silu(const Value<T>& a) {
  Tensor<T> out = a.tensor();
  for (auto& v : out.data_) {
    double s = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
    v = static_cast<T>(static_cast<double>(v) * s);
  }
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    const T* xv = n.parents[0]->value.data();
    for (int64_t i = 0; i < g.numel(); ++i) {
      double x = static_cast<double>(xv[i]);
      double s = 1.0 / (1.0 + std::exp(-x));
      g.data()[i] += static_cast<T>(static_cast<double>(n.grad.data()[i]) * (s * (1.0 + x * (1.0 - s))));
    }
  });
}

template <typename T>
Value<T> concat_channels(const std::vector<Value<T>>& parts) {
  check(!parts.empty(), "concat_channels: empty input");
  const int h = parts[0].height(), w = parts[0].width();
  int c = 0;
  for (const auto& p : parts) {
    check(p.height() == h && p.width() == w, "concat_channels: spatial mismatch");
    c += p.channels();
  }
  Tensor<T> out({h, w, c});
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.channels();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < pc; ++k) out.at(y, x, off + k) = p.tensor().at(y, x, k);
    off += pc;
  }
  return make_op<T>(std::move(out), parts, [](Node<T>& n) {
    const int h2 = n.value.height(), w2 = n.value.width();
    int off2 = 0;
    for (auto& pp : n.parents) {
      const int pc = pp->value.channels();
      if (pp->requires_grad) {
        Tensor<T>& g = pp->grad_buf();
        for (int y = 0; y < h2; ++y)
          for (int x = 0; x < w2; ++x)
            for (int k = 0; k < pc; ++k) g.at(y, x, k) += n.grad.at(y, x, off2 + k);
      }
      off2 += pc;
    }
  });
}

template <typename T>
Value<T> slice_channels(const Value<T>& a, int c0, int len) {
  check(c0 >= 0 && len >= 1 && c0 + len <= a.channels(), "slice_channels out of range");
  const int h = a.height(), w = a.width();
  Tensor<T> out({h, w, len});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < len; ++k) out.at(y, x, k) = a.tensor().at(y, x, c0 + k);
  return make_op<T>(std::move(out), {a}, [c0, len](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    for (int y = 0; y < n.value.height(); ++y)
      for (int x = 0; x < n.value.width(); ++x)
        for (int k = 0; k < len; ++k) g.at(y, x, c0 + k) += n.grad.at(y, x, k);
  });
}

template <typename T>
Value<T> crop_hw(const Value<T>& a, int y0, int x0, int h, int w) {
  check(y0 >= 0 && x0 >= 0 && y0 + h <= a.height() && x0 + w <= a.width(), "crop_hw out of range");
  const int c = a.channels();
  Tensor<T> out({h, w, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) out.at(y, x, k) = a.tensor().at(y0 + y, x0 + x, k);
  return make_op<T>(std::move(out), {a}, [y0, x0](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    for (int y = 0; y < n.value.height(); ++y)
      for (int x = 0; x < n.value.width(); ++x)
        for (int k = 0; k < n.value.channels(); ++k) g.at(y0 + y, x0 + x, k) += n.grad.at(y, x, k);
  });
}

/// x (H,W,C) times a per-channel vector s (1,1,C).
template <typename T>
Value<T> mul_channel(const Value<T>& x, const Value<T>& s) {
  check(s.height() == 1 && s.width() == 1 && s.channels() == x.channels(), "mul_channel: scale must be (1,1,C)");
  Tensor<T> out = x.tensor();
  const T* sv = s.tensor().data();
  const int c = x.channels();
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] *= sv[i % c];
  return make_op<T>(std::move(out), {x, s}, [](Node<T>& n) {
    const int c2 = n.value.channels();
    const T* xv = n.parents[0]->value.data();
    const T* sv2 = n.parents[1]->value.data();
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += n.grad.data()[i] * sv2[i % c2];
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int k = 0; k < c2; ++k) {
        double acc = 0;
        for (int64_t i = k; i < n.value.numel(); i += c2)
          acc += static_cast<double>(n.grad.data()[i]) * static_cast<double>(xv[i]);
        g.data()[k] += static_cast<T>(acc);
      }
    }
  });
}

/// x (H,W,C) times a single-channel map m (H,W,1), broadcast over channels.
template <typename T>
Value<T> mul_map(const Value<T>& x, const Value<T>& m) {
  check(m.height() == x.height() && m.width() == x.width() && m.channels() == 1,
        "mul_map: gate must be (H,W,1)");
  Tensor<T> out = x.tensor();
  const int h = x.height(), w = x.width(), c = x.channels();
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      T mv = m.tensor().at(y, xx, 0);
      for (int k = 0; k < c; ++k) out.at(y, xx, k) *= mv;
    }
  return make_op<T>(std::move(out), {x, m}, [](Node<T>& n) {
    const int h2 = n.value.height(), w2 = n.value.width(), c2 = n.value.channels();
    const Tensor<T>& xv = n.parents[0]->value;
    const Tensor<T>& mv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x)
          for (int k = 0; k < c2; ++k) g.at(y, x, k) += n.grad.at(y, x, k) * mv.at(y, x, 0);
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x) {
          double acc = 0;
          for (int k = 0; k < c2; ++k)
            acc += static_cast<double>(n.grad.at(y, x, k)) * static_cast<double>(xv.at(y, x, k));
          g.at(y, x, 0) += static_cast<T>(acc);
        }
    }
  });
}

template <typename T>
Value<T> global_avg_pool(const Value<T>& x) {
  const int h = x.height(), w = x.width(), c = x.channels();
  Tensor<T> out({1, 1, c});
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int k = 0; k < c; ++k) {
    double acc = 0;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) acc += static_cast<double>(x.tensor().at(y, xx, k));
    out.data()[k] = static_cast<T>(acc * inv);
  }
  return make_op<T>(std::move(out), {x}, [inv](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    const int c2 = g.channels();
    for (int64_t i = 0; i < g.numel(); ++i)
      g.data()[i] += static_cast<T>(static_cast<double>(n.grad.data()[i % c2]) * inv);
  });
}

template <typename T>
Value<T> mean_all(const Value<T>& x) {
  double acc = 0;
  for (int64_t i = 0; i < x.tensor().numel(); ++i) acc += static_cast<double>(x.tensor().data()[i]);
  const double inv = 1.0 / static_cast<double>(x.tensor().numel());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc * inv));
  return make_op<T>(std::move(out), {x}, [inv](Node<T>& n) {
    if (!n.parents[0]->requires_grad) return;
    Tensor<T>& g = n.parents[0]->grad_buf();
    T gv = static_cast<T>(static_cast<double>(n.grad.data()[0]) * inv);
    for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += gv;
  });
}

/// Per-position layer norm over the channel axis with affine gain/bias.
template <typename T>
Value<T> layer_norm(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta, double eps = 1e-6) {
  const int h = x.height(), w = x.width(), c = x.channels();
  check(gamma.channels() == c && beta.channels() == c, "layer_norm: affine dims mismatch");
  Tensor<T> out({h, w, c});
  const T* gv = gamma.tensor().data();
  const T* bv = beta.tensor().data();
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      double mu = 0;
      for (int k = 0; k < c; ++k) mu += static_cast<double>(x.tensor().at(y, xx, k));
      mu /= c;
      double var = 0;
      for (int k = 0; k < c; ++k) {
        double d = static_cast<double>(x.tensor().at(y, xx, k)) - mu;
        var += d * d;
      }
      var /= c;
      double inv = 1.0 / std::sqrt(var + eps);
      for (int k = 0; k < c; ++k)
        out.at(y, xx, k) = static_cast<T>(((static_cast<double>(x.tensor().at(y, xx, k)) - mu) * inv) *
                                              static_cast<double>(gv[k]) +
                                          static_cast<double>(bv[k]));
    }
  return make_op<T>(std::move(out), {x, gamma, beta}, [eps](Node<T>& n) {
    const Tensor<T>& xv = n.parents[0]->value;
    const T* gv2 = n.parents[1]->value.data();
    const int h2 = xv.height(), w2 = xv.width(), c2 = xv.channels();
    Tensor<T>* gx = n.parents[0]->requires_grad ? &n.parents[0]->grad_buf() : nullptr;
    Tensor<T>* gg = n.parents[1]->requires_grad ? &n.parents[1]->grad_buf() : nullptr;
    Tensor<T>* gb = n.parents[2]->requires_grad ? &n.parents[2]->grad_buf() : nullptr;
    std::vector<double> xhat(static_cast<size_t>(c2));
    for (int y = 0; y < h2; ++y)
      for (int x = 0; x < w2; ++x) {
        double mu = 0;
        for (int k = 0; k < c2; ++k) mu += static_cast<double>(xv.at(y, x, k));
        mu /= c2;
        double var = 0;
        for (int k = 0; k < c2; ++k) {
          double d = static_cast<double>(xv.at(y, x, k)) - mu;
          var += d * d;
        }
        var /= c2;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int k = 0; k < c2; ++k) xhat[static_cast<size_t>(k)] = (static_cast<double>(xv.at(y, x, k)) - mu) * inv;
        if (gg || gb) {
          for (int k = 0; k < c2; ++k) {
            double go = static_cast<double>(n.grad.at(y, x, k));
            if (gg) gg->data()[k] += static_cast<T>(go * xhat[static_cast<size_t>(k)]);
            if (gb) gb->data()[k] += static_cast<T>(go);
          }
        }
        if (gx) {
          double sum_d = 0, sum_dx = 0;
          for (int k = 0; k < c2; ++k) {
            double d = static_cast<double>(n.grad.at(y, x, k)) * static_cast<double>(gv2[k]);
            sum_d += d;
            sum_dx += d * xhat[static_cast<size_t>(k)];
          }
          for (int k = 0; k < c2; ++k) {
            double d = static_cast<double>(n.grad.at(y, x, k)) * static_cast<double>(gv2[k]);
            double v = (d - sum_d / c2 - xhat[static_cast<size_t>(k)] * sum_dx / c2) * inv;
            gx->at(y, x, k) += static_cast<T>(v);
          }
        }
      }
  });
}

/// out[o] = b[o] + sum_i W[o,i] * s[i], for s of shape (1,1,Cin) and W of
/// shape (Cout,Cin). Pass an undefined bias to skip it.
template <typename T>
Value<T> linear_vec(const Value<T>& s, const Value<T>& w, const Value<T>& b = {}) {
  const int cin = s.channels();
  check(s.height() == 1 && s.width() == 1, "linear_vec expects (1,1,C) input");
  check(w.tensor().rank() == 2 && w.tensor().dim(1) == cin, "linear_vec: weight shape mismatch");
  const int cout = w.tensor().dim(0);
  Tensor<T> out({1, 1, cout});
  for (int o = 0; o < cout; ++o) {
    double acc = b.defined() ? static_cast<double>(b.tensor().data()[o]) : 0.0;
    for (int i = 0; i < cin; ++i)
      acc += static_cast<double>(w.tensor().at2(o, i)) * static_cast<double>(s.tensor().data()[i]);
    out.data()[o] = static_cast<T>(acc);
  }
  std::vector<Value<T>> parents{s, w};
  if (b.defined()) parents.push_back(b);
  return make_op<T>(std::move(out), std::move(parents), [cin, cout](Node<T>& n) {
    const T* sv = n.parents[0]->value.data();
    const Tensor<T>& wv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor<T>& g = n.parents[0]->grad_buf();
      for (int i = 0; i < cin; ++i) {
        double acc = 0;
        for (int o = 0; o < cout; ++o)
          acc += static_cast<double>(n.grad.data()[o]) * static_cast<double>(wv.at2(o, i));
        g.data()[i] += static_cast<T>(acc);
      }
    }
    if (n.parents[1]->requires_grad) {
      Tensor<T>& g = n.parents[1]->grad_buf();
      for (int o = 0; o < cout; ++o)
        for (int i = 0; i < cin; ++i) g.at2(o, i) += n.grad.data()[o] * sv[i];
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Tensor<T>& g = n.parents[2]->grad_buf();
      for (int o = 0; o < cout; ++o) g.data()[o] += n.grad.data()[o];
    }
  });
}

/// SimpleGate: split channels in half, multiply the halves.
template <typename T>
Value<T> simple_gate(const Value<T>& x) {
  check(x.channels() % 2 == 0, "simple_gate requires an even channel count, got " +
                                   std::to_string(x.channels()));
  const int half = x.channels() / 2;
  return mul(slice_channels(x, 0, half), slice_channels(x, half, half));
}

}  // namespace fsenet::nn
