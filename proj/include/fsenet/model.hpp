#pragma once

#include "fsenet/config.hpp"
#include "fsenet/nn/blocks.hpp"
#include "fsenet/nn/loss.hpp"
#include "fsenet/pyramid.hpp"

namespace fsenet {

/// The full frequency-aware shadow erasing network: Laplacian decomposition,
/// low-frequency deshading, contour-gated high bands, and differentiable
/// reconstruction. Default initialisation is an exact identity mapping
/// (zero final convs, unit contour), so forward(img) == img until training
/// moves the residual heads.
template <typename T>
class FSENet {
 public:
  FSENet(const FSENetConfig& cfg, nn::ParamStore<T>& store, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    low_ = nn::LowFreqBranch<T>(store, rng, "low", cfg.base_channels, cfg.dat_blocks, cfg.dat_heads,
                                cfg.unet_levels, cfg.dfe_per_level, cfg.deformable);
    contour_ = nn::ContourNet<T>(store, rng, "contour", cfg.trunk_channels, cfg.contour_blocks);
    const int n_expand = cfg.share_trm ? std::min(1, cfg.depth - 1) : cfg.depth - 1;
    for (int i = 0; i < n_expand; ++i)
      expand_.emplace_back(store, rng, "expand" + std::to_string(i), cfg.trunk_channels,
                           cfg.trm_dilations, cfg.se_reduction, cfg.spp_grids);
  }

  /// Full forward pass on a 3-channel image tensor. Returns the pre-clamp
  /// output at the original resolution.
  nn::Value<T> forward(nn::PassContext<T>& ctx, const Tensor<T>& img,
                       nn::AttnProbe* probe = nullptr) const {
    if (img.channels() != 3)
      throw ShapeError("forward expects a 3-channel image, got " + img.shape_str());
    const int h = img.height(), w = img.width();
    auto [padded, pad] = pad_to_multiple(img, cfg_.pad_factor());
    LaplacianStack<T> stack = decompose(padded, cfg_.depth);

    nn::Value<T> low = nn::Value<T>::constant(stack.low);
    nn::Value<T> low_out = low_(ctx, low, probe);

    std::vector<nn::Value<T>> gated(static_cast<size_t>(cfg_.depth));
    nn::Value<T> band = nn::Value<T>::constant(stack.highs.back());
    nn::Value<T> cont = contour_(ctx, low, low_out, band);
    gated[static_cast<size_t>(cfg_.depth - 1)] = nn::mul_map(band, cont);
    for (int i = cfg_.depth - 2; i >= 0; --i) {
      const auto& refiner = expand_[cfg_.share_trm ? 0 : static_cast<size_t>(cfg_.depth - 2 - i)];
      cont = refiner(ctx, cont);
      nn::Value<T> b = nn::Value<T>::constant(stack.highs[static_cast<size_t>(i)]);
      gated[static_cast<size_t>(i)] = nn::mul_map(b, cont);
    }

    nn::Value<T> cur = low_out;
    for (int i = cfg_.depth - 1; i >= 0; --i)
      cur = nn::add(nn::pyr_up_v(cur), gated[static_cast<size_t>(i)]);
    if (pad.any()) cur = nn::crop_hw(cur, pad.top, pad.left, h, w);
    return cur;
  }

  /// Inference convenience: forward without grads, clamped to [0,1].
  Tensor<T> infer(nn::ParamStore<T>& store, const Tensor<T>& img) const {
    nn::NoGradGuard ng;
    nn::PassContext<T> ctx(&store, false);
    return clamp01(forward(ctx, img).tensor());
  }

  const FSENetConfig& config() const { return cfg_; }
  const nn::LowFreqBranch<T>& low_branch() const { return low_; }
  const nn::ContourNet<T>& contour_net() const { return contour_; }

 private:
  FSENetConfig cfg_;
  nn::LowFreqBranch<T> low_;
  nn::ContourNet<T> contour_;
  std::vector<nn::ExpandContour<T>> expand_;
};

/// Standalone loss evaluation: value, components, and d(loss)/d(pred).
template <typename T>
struct LossReport {
  double total = 0;
  double l1 = 0;
  double ssim_term = 0;
  Tensor<T> grad;
};

template <typename T>
LossReport<T> eval_loss_with_grad(const Tensor<T>& pred, const Tensor<T>& target, double lambda_ssim,
                                  double beta = 1.0) {
  if (!pred.same_shape(target)) throw ShapeError("loss: pred/target shape mismatch");
  nn::Value<T> p = nn::Value<T>::leaf(pred, true);
  nn::LossParts<T> parts = nn::total_loss(p, target, lambda_ssim, beta);
  nn::backward(parts.total);
  LossReport<T> r;
  r.total = static_cast<double>(parts.total.tensor().data()[0]);
  r.l1 = parts.l1;
  r.ssim_term = parts.ssim_term;
  r.grad = p.grad();
  return r;
}

}  // namespace fsenet
