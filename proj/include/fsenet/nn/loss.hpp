#pragma once

#include "fsenet/filters.hpp"
#include "fsenet/nn/ops_conv.hpp"

namespace fsenet::nn {

/// Mean-reduced SmoothL1 against a fixed target. Quadratic (0.5 d^2 / beta)
/// below beta, |d| - 0.5 beta above.
template <typename T>
Value<T> smooth_l1(const Value<T>& pred, const Tensor<T>& target, double beta = 1.0) {
  check(pred.tensor().same_shape(target), "smooth_l1: shape mismatch");
  const int64_t n = target.numel();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(pred.tensor().data()[i]) - static_cast<double>(target.data()[i]);
    double ad = std::abs(d);
    acc += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  Tensor<T> tcopy = target;
  return make_op<T>(std::move(out), {pred}, [tcopy, beta, n](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& g = nd.parents[0]->grad_buf();
    const double scale = static_cast<double>(nd.grad.data()[0]) / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      double d = static_cast<double>(nd.parents[0]->value.data()[i]) - static_cast<double>(tcopy.data()[i]);
      double dd = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0);
      g.data()[i] += static_cast<T>(scale * dd);
    }
  });
}

struct SsimSpec {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;  // (k1 * L)^2 with L = 1
  double c2 = 0.03 * 0.03;
};

/// Mean SSIM of pred against a fixed target, built from differentiable
/// primitives (Gaussian means per valid window, unit data range).
template <typename T>
Value<T> ssim_mean_v(const Value<T>& pred, const Tensor<T>& target, const SsimSpec& spec = {}) {
  check(pred.tensor().same_shape(target), "ssim: shape mismatch");
  check(std::min(pred.height(), pred.width()) >= spec.window,
        "ssim: image smaller than the " + std::to_string(spec.window) + "px window");
  Tensor<T> kernel = gaussian_kernel2d<T>(spec.window, spec.sigma);
  Value<T> t = Value<T>::constant(target);
  Value<T> mu_p = fixed_blur_valid(pred, kernel);
  Value<T> mu_t = fixed_blur_valid(t, kernel);
  Value<T> pp = fixed_blur_valid(mul(pred, pred), kernel);
  Value<T> tt = fixed_blur_valid(mul(t, t), kernel);
  Value<T> pt = fixed_blur_valid(mul(pred, t), kernel);
  Value<T> var_p = sub(pp, mul(mu_p, mu_p));
  Value<T> var_t = sub(tt, mul(mu_t, mu_t));
  Value<T> cov = sub(pt, mul(mu_p, mu_t));
  Value<T> lum = div(add_scalar(scale(mul(mu_p, mu_t), 2.0), spec.c1),
                     add_scalar(add(mul(mu_p, mu_p), mul(mu_t, mu_t)), spec.c1));
  Value<T> str = div(add_scalar(scale(cov, 2.0), spec.c2), add_scalar(add(var_p, var_t), spec.c2));
  return mean_all(mul(lum, str));
}

template <typename T>
struct LossParts {
  Value<T> total;
  double l1 = 0;
  double ssim_term = 0;  // lambda * (1 - mean ssim); 0 when lambda == 0
};

/// L = SmoothL1(pred, target) + lambda * (1 - SSIM(pred, target)).
/// The SSIM term is only evaluated when lambda > 0.
template <typename T>
LossParts<T> total_loss(const Value<T>& pred, const Tensor<T>& target, double lambda_ssim,
                        double beta = 1.0) {
  LossParts<T> parts;
  Value<T> l1 = smooth_l1(pred, target, beta);
  parts.l1 = static_cast<double>(l1.tensor().data()[0]);
  if (lambda_ssim > 0) {
    Value<T> ssim = ssim_mean_v(pred, target);
    Value<T> term = scale(add_scalar(scale(ssim, -1.0), 1.0), lambda_ssim);
    parts.ssim_term = static_cast<double>(term.tensor().data()[0]);
    parts.total = add(l1, term);
  } else {
    parts.total = l1;
  }
  return parts;
}

}  // namespace fsenet::nn
