#pragma once

#include <cmath>

#include "fsenet/nn/ops.hpp"

namespace fsenet::nn {

/// Test hook: forwards record softmax row-sum drift (and, for layer
/// attention, the full mixing matrix) here when a probe is supplied.
struct AttnProbe {
  double max_row_sum_err = 0;
  int64_t rows_seen = 0;
  std::vector<std::vector<double>> matrix;  // layer attention only
};

enum class Axis { height, width };

namespace attn_detail {

// softmax over `scores` in place, max-subtracted for stability
inline void softmax_row(std::vector<double>& row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

}  // namespace attn_detail

/// Multi-head scaled dot-product attention along one spatial axis: every
/// column (axis=height) or row (axis=width) is an independent sequence.
/// q,k,v: (H,W,C) with C divisible by `heads`. Scale is 1/sqrt(head_dim).
template <typename T>
Value<T> axial_attention(const Value<T>& q, const Value<T>& k, const Value<T>& v, Axis axis, int heads,
                         AttnProbe* probe = nullptr) {
  const int h = q.height(), w = q.width(), c = q.channels();
  check(k.height() == h && k.width() == w && k.channels() == c, "axial_attention: k shape mismatch");
  check(v.height() == h && v.width() == w && v.channels() == c, "axial_attention: v shape mismatch");
  check(heads >= 1 && c % heads == 0, "axial_attention: heads must divide channels");
  const int d = c / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const int seq = axis == Axis::height ? h : w;   // tokens per sequence
  const int nseq = axis == Axis::height ? w : h;  // number of sequences

  const Tensor<T>& qt = q.tensor();
  const Tensor<T>& kt = k.tensor();
  const Tensor<T>& vt = v.tensor();
  Tensor<T> out({h, w, c});

  auto idx = [axis, w, c](int s, int t, int ch) -> size_t {
    // s = sequence index, t = token index
    int y = axis == Axis::height ? t : s;
    int x = axis == Axis::height ? s : t;
    return (static_cast<size_t>(y) * w + x) * c + ch;
  };

  struct ProbeAcc {
    double err = 0;
    int64_t rows = 0;
  };
  std::vector<ProbeAcc> probe_acc(probe ? static_cast<size_t>(nseq) : 0);

  parallel_for(nseq, [&](int64_t s0, int64_t s1) {
    std::vector<double> scores(static_cast<size_t>(seq));
    for (int64_t s = s0; s < s1; ++s)
      for (int g = 0; g < heads; ++g) {
        const int ch0 = g * d;
        for (int i = 0; i < seq; ++i) {
          for (int j = 0; j < seq; ++j) {
            double dot = 0;
            for (int e = 0; e < d; ++e)
              dot += static_cast<double>(qt.data()[idx(static_cast<int>(s), i, ch0 + e)]) *
                     static_cast<double>(kt.data()[idx(static_cast<int>(s), j, ch0 + e)]);
            scores[static_cast<size_t>(j)] = dot * inv_scale;
          }
          attn_detail::softmax_row(scores);
          if (probe) {
            double rs = 0;
            for (double a : scores) rs += a;
            auto& pa = probe_acc[static_cast<size_t>(s)];
            pa.err = std::max(pa.err, std::abs(rs - 1.0));
            pa.rows++;
          }
          for (int e = 0; e < d; ++e) {
            double acc = 0;
            for (int j = 0; j < seq; ++j)
              acc += scores[static_cast<size_t>(j)] * static_cast<double>(vt.data()[idx(static_cast<int>(s), j, ch0 + e)]);
            out.data()[idx(static_cast<int>(s), i, ch0 + e)] = static_cast<T>(acc);
          }
        }
      }
  });
  if (probe) {
    for (const auto& pa : probe_acc) {
      probe->max_row_sum_err = std::max(probe->max_row_sum_err, pa.err);
      probe->rows_seen += pa.rows;
    }
  }

  return make_op<T>(std::move(out), {q, k, v}, [axis, heads, d, inv_scale, seq, nseq, w, c](Node<T>& n) {
    const Tensor<T>& qt2 = n.parents[0]->value;
    const Tensor<T>& kt2 = n.parents[1]->value;
    const Tensor<T>& vt2 = n.parents[2]->value;
    const Tensor<T>& go = n.grad;
    Tensor<T>* gq = n.parents[0]->requires_grad ? &n.parents[0]->grad_buf() : nullptr;
    Tensor<T>* gk = n.parents[1]->requires_grad ? &n.parents[1]->grad_buf() : nullptr;
    Tensor<T>* gv = n.parents[2]->requires_grad ? &n.parents[2]->grad_buf() : nullptr;

    auto idx = [axis, w, c](int s, int t, int ch) -> size_t {
      int y = axis == Axis::height ? t : s;
      int x = axis == Axis::height ? s : t;
      return (static_cast<size_t>(y) * w + x) * c + ch;
    };

    parallel_for(nseq, [&](int64_t s0, int64_t s1) {
      std::vector<double> a(static_cast<size_t>(seq) * seq);   // attention matrix
      std::vector<double> da(static_cast<size_t>(seq) * seq);  // grad wrt attention
      for (int64_t s = s0; s < s1; ++s)
        for (int g = 0; g < heads; ++g) {
          const int ch0 = g * d;
          // recompute attention rows
          for (int i = 0; i < seq; ++i) {
            std::vector<double> row(static_cast<size_t>(seq));
            for (int j = 0; j < seq; ++j) {
              double dot = 0;
              for (int e = 0; e < d; ++e)
                dot += static_cast<double>(qt2.data()[idx(static_cast<int>(s), i, ch0 + e)]) *
                       static_cast<double>(kt2.data()[idx(static_cast<int>(s), j, ch0 + e)]);
              row[static_cast<size_t>(j)] = dot * inv_scale;
            }
            attn_detail::softmax_row(row);
            for (int j = 0; j < seq; ++j) a[static_cast<size_t>(i) * seq + j] = row[static_cast<size_t>(j)];
          }
          // dV and dA
          for (int i = 0; i < seq; ++i)
            for (int j = 0; j < seq; ++j) {
              double dot = 0;
              for (int e = 0; e < d; ++e)
                dot += static_cast<double>(go.data()[idx(static_cast<int>(s), i, ch0 + e)]) *
                       static_cast<double>(vt2.data()[idx(static_cast<int>(s), j, ch0 + e)]);
              da[static_cast<size_t>(i) * seq + j] = dot;
            }
          if (gv)
            for (int j = 0; j < seq; ++j)
              for (int e = 0; e < d; ++e) {
                double acc = 0;
                for (int i = 0; i < seq; ++i)
                  acc += a[static_cast<size_t>(i) * seq + j] *
                         static_cast<double>(go.data()[idx(static_cast<int>(s), i, ch0 + e)]);
                gv->data()[idx(static_cast<int>(s), j, ch0 + e)] += static_cast<T>(acc);
              }
          if (gq || gk) {
            // softmax backward: ds_ij = a_ij (da_ij - sum_k a_ik da_ik)
            for (int i = 0; i < seq; ++i) {
              double inner = 0;
              for (int j = 0; j < seq; ++j)
                inner += a[static_cast<size_t>(i) * seq + j] * da[static_cast<size_t>(i) * seq + j];
              for (int j = 0; j < seq; ++j) {
                double ds = a[static_cast<size_t>(i) * seq + j] *
                            (da[static_cast<size_t>(i) * seq + j] - inner) * inv_scale;
                da[static_cast<size_t>(i) * seq + j] = ds;  // reuse buffer for ds
              }
            }
            for (int i = 0; i < seq; ++i)
              for (int e = 0; e < d; ++e) {
                if (gq) {
                  double acc = 0;
                  for (int j = 0; j < seq; ++j)
                    acc += da[static_cast<size_t>(i) * seq + j] *
                           static_cast<double>(kt2.data()[idx(static_cast<int>(s), j, ch0 + e)]);
                  gq->data()[idx(static_cast<int>(s), i, ch0 + e)] += static_cast<T>(acc);
                }
                if (gk) {
                  double acc = 0;
                  for (int j = 0; j < seq; ++j)
                    acc += da[static_cast<size_t>(j) * seq + i] *
                           static_cast<double>(qt2.data()[idx(static_cast<int>(s), j, ch0 + e)]);
                  gk->data()[idx(static_cast<int>(s), i, ch0 + e)] += static_cast<T>(acc);
                }
              }
          }
        }
    });
  });
}

/// Layer attention across N stacked C-channel groups of a (H,W,N*C) map:
/// A = softmax(Q_hat K_hat / alpha) is N x N (rows normalised over the last
/// axis) and the output group n mixes value groups by column n of A.
/// `alpha` is a learnable scalar temperature.
template <typename T>
Value<T> layer_attention(const Value<T>& q, const Value<T>& k, const Value<T>& v, const Value<T>& alpha,
                         int n_layers, AttnProbe* probe = nullptr) {
  const int h = q.height(), w = q.width(), nc = q.channels();
  check(k.height() == h && k.width() == w && k.channels() == nc, "layer_attention: k shape mismatch");
  check(v.height() == h && v.width() == w && v.channels() == nc, "layer_attention: v shape mismatch");
  check(n_layers >= 1 && nc % n_layers == 0, "layer_attention: layers must divide channels");
  check(alpha.tensor().numel() == 1, "layer_attention: alpha must be scalar");
  const int c = nc / n_layers;
  const double av = static_cast<double>(alpha.tensor().data()[0]);
  check(av != 0.0, "layer_attention: alpha must be nonzero");

  const Tensor<T>& qt = q.tensor();
  const Tensor<T>& kt = k.tensor();
  const Tensor<T>& vt = v.tensor();
  const int64_t npix = static_cast<int64_t>(h) * w;

  // S[n][m] = <Q group n, K group m>, dot over all pixels and c channels.
  std::vector<double> s_mat(static_cast<size_t>(n_layers) * n_layers, 0.0);
  for (int64_t p = 0; p < npix; ++p) {
    const T* qp = &qt.data()[p * nc];
    const T* kp = &kt.data()[p * nc];
    for (int a = 0; a < n_layers; ++a)
      for (int m = 0; m < n_layers; ++m) {
        double dot = 0;
        for (int e = 0; e < c; ++e)
          dot += static_cast<double>(qp[a * c + e]) * static_cast<double>(kp[m * c + e]);
        s_mat[static_cast<size_t>(a) * n_layers + m] += dot;
      }
  }
  std::vector<double> a_mat = s_mat;
  for (int r = 0; r < n_layers; ++r) {
    std::vector<double> row(a_mat.begin() + r * n_layers, a_mat.begin() + (r + 1) * n_layers);
    for (double& x : row) x /= av;
    attn_detail::softmax_row(row);
    for (int m = 0; m < n_layers; ++m) a_mat[static_cast<size_t>(r) * n_layers + m] = row[static_cast<size_t>(m)];
  }
  if (probe) {
    probe->matrix.clear();
    for (int r = 0; r < n_layers; ++r) {
      std::vector<double> row(a_mat.begin() + r * n_layers, a_mat.begin() + (r + 1) * n_layers);
      double rs = 0;
      for (double x : row) rs += x;
      probe->max_row_sum_err = std::max(probe->max_row_sum_err, std::abs(rs - 1.0));
      probe->rows_seen++;
      probe->matrix.push_back(std::move(row));
    }
  }

  // out group n = sum_m V group m * A[m][n]
  Tensor<T> out({h, w, nc});
  parallel_for(npix, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* vp = &vt.data()[p * nc];
      T* op = &out.data()[p * nc];
      for (int nn = 0; nn < n_layers; ++nn)
        for (int e = 0; e < c; ++e) {
          double acc = 0;
          for (int m = 0; m < n_layers; ++m)
            acc += static_cast<double>(vp[m * c + e]) * a_mat[static_cast<size_t>(m) * n_layers + nn];
          op[nn * c + e] = static_cast<T>(acc);
        }
    }
  });

  return make_op<T>(std::move(out), {q, k, v, alpha},
                    [n_layers, c, av, s_mat, a_mat, npix, nc](Node<T>& n) {
    const Tensor<T>& qt2 = n.parents[0]->value;
    const Tensor<T>& kt2 = n.parents[1]->value;
    const Tensor<T>& vt2 = n.parents[2]->value;
    const Tensor<T>& go = n.grad;
    Tensor<T>* gq = n.parents[0]->requires_grad ? &n.parents[0]->grad_buf() : nullptr;
    Tensor<T>* gk = n.parents[1]->requires_grad ? &n.parents[1]->grad_buf() : nullptr;
    Tensor<T>* gv = n.parents[2]->requires_grad ? &n.parents[2]->grad_buf() : nullptr;
    Tensor<T>* ga = n.parents[3]->requires_grad ? &n.parents[3]->grad_buf() : nullptr;

    // dA[m][n] = <V group m, gout group n>; dV group m = sum_n A[m][n] gout_n
    std::vector<double> d_amat(static_cast<size_t>(n_layers) * n_layers, 0.0);
    for (int64_t p = 0; p < npix; ++p) {
      const T* vp = &vt2.data()[p * nc];
      const T* gp = &go.data()[p * nc];
      for (int m = 0; m < n_layers; ++m)
        for (int nn = 0; nn < n_layers; ++nn) {
          double dot = 0;
          for (int e = 0; e < c; ++e)
            dot += static_cast<double>(vp[m * c + e]) * static_cast<double>(gp[nn * c + e]);
          d_amat[static_cast<size_t>(m) * n_layers + nn] += dot;
        }
    }
    if (gv) {
      parallel_for(npix, [&](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
          const T* gp = &go.data()[p * nc];
          T* gvp = &gv->data()[p * nc];
          for (int m = 0; m < n_layers; ++m)
            for (int e = 0; e < c; ++e) {
              double acc = 0;
              for (int nn = 0; nn < n_layers; ++nn)
                acc += a_mat[static_cast<size_t>(m) * n_layers + nn] * static_cast<double>(gp[nn * c + e]);
              gvp[m * c + e] += static_cast<T>(acc);
            }
        }
      });
    }
    if (gq || gk || ga) {
      // softmax backward per row, then dS = ds / alpha
      std::vector<double> d_smat(static_cast<size_t>(n_layers) * n_layers, 0.0);
      for (int r = 0; r < n_layers; ++r) {
        double inner = 0;
        for (int m = 0; m < n_layers; ++m)
          inner += a_mat[static_cast<size_t>(r) * n_layers + m] * d_amat[static_cast<size_t>(r) * n_layers + m];
        for (int m = 0; m < n_layers; ++m) {
          double ds = a_mat[static_cast<size_t>(r) * n_layers + m] *
                      (d_amat[static_cast<size_t>(r) * n_layers + m] - inner);
          d_smat[static_cast<size_t>(r) * n_layers + m] = ds;
        }
      }
      if (ga) {
        double acc = 0;
        for (size_t i = 0; i < d_smat.size(); ++i) acc += d_smat[i] * (-s_mat[i] / (av * av));
        ga->data()[0] += static_cast<T>(acc);
      }
      if (gq || gk) {
        const double inv_a = 1.0 / av;
        for (int64_t p = 0; p < npix; ++p) {
          const T* qp = &qt2.data()[p * nc];
          const T* kp = &kt2.data()[p * nc];
          T* gqp = gq ? &gq->data()[p * nc] : nullptr;
          T* gkp = gk ? &gk->data()[p * nc] : nullptr;
          for (int r = 0; r < n_layers; ++r)
            for (int m = 0; m < n_layers; ++m) {
              double dsv = d_smat[static_cast<size_t>(r) * n_layers + m] * inv_a;
              if (dsv == 0) continue;
              for (int e = 0; e < c; ++e) {
                if (gqp) gqp[r * c + e] += static_cast<T>(dsv * static_cast<double>(kp[m * c + e]));
                if (gkp) gkp[m * c + e] += static_cast<T>(dsv * static_cast<double>(qp[r * c + e]));
              }
            }
        }
      }
    }
  });
}

}  // namespace fsenet::nn
