#pragma once

#include "fsenet/nn/module.hpp"
#include "fsenet/nn/ops_attn.hpp"
#include "fsenet/nn/ops_resize.hpp"

namespace fsenet::nn {

/// One attention stage of a DAT block: multi-head attention along a single
/// spatial axis with 1x1 qkv projections and a zero-initialised output
/// projection, wrapped in a residual.
template <typename T>
class AxialAttnStage {
 public:
  AxialAttnStage() = default;
  AxialAttnStage(ParamStore<T>& store, Rng& rng, const std::string& name, int c, int heads, Axis axis)
      : axis_(axis), heads_(heads) {
    q_ = Conv2dLayer<T>(store, rng, name + ".q", 1, 1, c, c);
    k_ = Conv2dLayer<T>(store, rng, name + ".k", 1, 1, c, c);
    v_ = Conv2dLayer<T>(store, rng, name + ".v", 1, 1, c, c);
    proj_ = Conv2dLayer<T>(store, rng, name + ".proj", 1, 1, c, c, {}, Init::zero);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x, AttnProbe* probe = nullptr) const {
    Value<T> attn = axial_attention(q_(ctx, x), k_(ctx, x), v_(ctx, x), axis_, heads_, probe);
    return add(x, proj_(ctx, attn));
  }

 private:
  Conv2dLayer<T> q_, k_, v_, proj_;
  Axis axis_ = Axis::height;
  int heads_ = 1;
};

/// Dimension-aware transformer block: height attention, width attention,
/// then a depth-wise + point-wise local merge, each residual.
template <typename T>
class DatBlock {
 public:
  DatBlock() = default;
  DatBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int c, int heads) {
    h_attn_ = AxialAttnStage<T>(store, rng, name + ".hattn", c, heads, Axis::height);
    w_attn_ = AxialAttnStage<T>(store, rng, name + ".wattn", c, heads, Axis::width);
    merge_dw_ = DepthwiseLayer<T>(store, rng, name + ".merge.dw", 3, c, ConvSpec{1, 1, 1});
    merge_pw_ = Conv2dLayer<T>(store, rng, name + ".merge.pw", 1, 1, c, c);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x, AttnProbe* probe = nullptr) const {
    Value<T> y = h_attn_(ctx, x, probe);
    y = w_attn_(ctx, y, probe);
    return add(y, merge_pw_(ctx, merge_dw_(ctx, y)));
  }

 private:
  AxialAttnStage<T> h_attn_, w_attn_;
  DepthwiseLayer<T> merge_dw_;
  Conv2dLayer<T> merge_pw_;
};

/// Tri-layer attention alignment. Takes N same-shaped C-channel maps,
/// mixes them through an NxN attention with learnable temperature, and
/// projects the NC-channel result back to C for downstream blocks.
template <typename T>
class TaaBlock {
 public:
  TaaBlock() = default;
  TaaBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int n, int c) : n_(n) {
    const int nc = n * c;
    pre_ = Conv2dLayer<T>(store, rng, name + ".pre", 1, 1, nc, nc);
    qd_ = DepthwiseLayer<T>(store, rng, name + ".q", 3, nc, ConvSpec{1, 1, 1});
    kd_ = DepthwiseLayer<T>(store, rng, name + ".k", 3, nc, ConvSpec{1, 1, 1});
    vd_ = DepthwiseLayer<T>(store, rng, name + ".v", 3, nc, ConvSpec{1, 1, 1});
    out_ = Conv2dLayer<T>(store, rng, name + ".out", 1, 1, nc, nc, {}, Init::zero);
    proj_ = Conv2dLayer<T>(store, rng, name + ".proj", 1, 1, nc, c);
    alpha_ = store.add(name + ".alpha", Tensor<T>::scalar(T(1)));
  }

  Value<T> operator()(PassContext<T>& ctx, const std::vector<Value<T>>& feats,
                      AttnProbe* probe = nullptr, Value<T>* f4_out = nullptr) const {
    check(static_cast<int>(feats.size()) == n_, "taa: expected " + std::to_string(n_) + " feature maps");
    for (const auto& f : feats)
      check(f.tensor().same_shape(feats[0].tensor()), "taa: member shape mismatch");
    Value<T> fin = concat_channels(feats);
    Value<T> p = pre_(ctx, fin);
    Value<T> la = layer_attention(qd_(ctx, p), kd_(ctx, p), vd_(ctx, p), ctx.param(alpha_), n_, probe);
    Value<T> f4 = add(out_(ctx, la), fin);
    if (f4_out) *f4_out = f4;
    return proj_(ctx, f4);
  }

  int alpha_id() const { return alpha_; }

 private:
  int n_ = 0;
  Conv2dLayer<T> pre_, out_, proj_;
  DepthwiseLayer<T> qd_, kd_, vd_;
  int alpha_ = -1;
};

/// Deeper feature extraction block:
/// LN -> 1x1 (C->2C) -> dw3x3 -> deformable 3x3 -> SimpleGate -> SCA ->
/// 1x1 (C->C, zero init) with the skip taken before the LN.
template <typename T>
class DfeBlock {
 public:
  DfeBlock() = default;
  DfeBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int c, bool deformable) {
    ln_ = LayerNormLayer<T>(store, name + ".ln", c);
    expand_ = Conv2dLayer<T>(store, rng, name + ".expand", 1, 1, c, 2 * c);
    dw_ = DepthwiseLayer<T>(store, rng, name + ".dw", 3, 2 * c, ConvSpec{1, 1, 1});
    deform_ = DeformConvLayer<T>(store, rng, name + ".deform", 2 * c, 2 * c, deformable);
    sca_ = ScaLayer<T>(store, rng, name + ".sca", c);
    proj_ = Conv2dLayer<T>(store, rng, name + ".proj", 1, 1, c, c, {}, Init::zero);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    Value<T> y = ln_(ctx, x);
    y = expand_(ctx, y);
    y = dw_(ctx, y);
    y = deform_(ctx, y);
    y = simple_gate(y);
    y = sca_(ctx, y);
    y = proj_(ctx, y);
    return add(x, y);
  }

  const DeformConvLayer<T>& deform() const { return deform_; }
  const ScaLayer<T>& sca() const { return sca_; }

 private:
  LayerNormLayer<T> ln_;
  Conv2dLayer<T> expand_, proj_;
  DepthwiseLayer<T> dw_;
  DeformConvLayer<T> deform_;
  ScaLayer<T> sca_;
};

/// UNet-style encoder/decoder of DFE blocks, additive skips, strided-conv
/// downsampling and bilinear-upsample + conv upsampling.
template <typename T>
class DfeUnet {
 public:
  DfeUnet() = default;
  DfeUnet(ParamStore<T>& store, Rng& rng, const std::string& name, int c, int levels, int per_level,
          bool deformable)
      : levels_(levels) {
    check(levels >= 1, "dfe_unet: levels must be >= 1");
    for (int l = 0; l < levels - 1; ++l) {
      int ch = c << l;
      std::vector<DfeBlock<T>> blocks;
      for (int i = 0; i < per_level; ++i)
        blocks.emplace_back(store, rng, name + ".enc" + std::to_string(l) + "." + std::to_string(i), ch,
                            deformable);
      enc_.push_back(std::move(blocks));
      down_.emplace_back(store, rng, name + ".down" + std::to_string(l), 3, 3, ch, ch * 2,
                         ConvSpec{2, 1, 1});
    }
    int bch = c << (levels - 1);
    for (int i = 0; i < per_level; ++i)
      bottom_.emplace_back(store, rng, name + ".bottom." + std::to_string(i), bch, deformable);
    for (int l = levels - 2; l >= 0; --l) {
      int ch = c << l;
      up_.emplace_back(store, rng, name + ".up" + std::to_string(l), 3, 3, ch * 2, ch,
                       ConvSpec{1, 1, 1});
      std::vector<DfeBlock<T>> blocks;
      for (int i = 0; i < per_level; ++i)
        blocks.emplace_back(store, rng, name + ".dec" + std::to_string(l) + "." + std::to_string(i), ch,
                            deformable);
      dec_.push_back(std::move(blocks));
    }
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    const int div = 1 << (levels_ - 1);
    check(x.height() % div == 0 && x.width() % div == 0,
          "dfe_unet: dims " + x.tensor().shape_str() + " not divisible by 2^" +
              std::to_string(levels_ - 1) + "; pad first");
    std::vector<Value<T>> skips;
    Value<T> cur = x;
    for (size_t l = 0; l < enc_.size(); ++l) {
      for (const auto& blk : enc_[l]) cur = blk(ctx, cur);
      skips.push_back(cur);
      cur = down_[l](ctx, cur);
    }
    for (const auto& blk : bottom_) cur = blk(ctx, cur);
    for (size_t i = 0; i < up_.size(); ++i) {
      cur = resize_bilinear_v(cur, cur.height() * 2, cur.width() * 2);
      cur = up_[i](ctx, cur);
      cur = add(cur, skips[skips.size() - 1 - i]);
      for (const auto& blk : dec_[i]) cur = blk(ctx, cur);
    }
    return cur;
  }

 private:
  int levels_ = 1;
  std::vector<std::vector<DfeBlock<T>>> enc_;
  std::vector<Conv2dLayer<T>> down_;
  std::vector<DfeBlock<T>> bottom_;
  std::vector<Conv2dLayer<T>> up_;
  std::vector<std::vector<DfeBlock<T>>> dec_;
};

template <typename T>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int c) {
    c1_ = Conv2dLayer<T>(store, rng, name + ".c1", 3, 3, c, c, ConvSpec{1, 1, 1});
    c2_ = Conv2dLayer<T>(store, rng, name + ".c2", 3, 3, c, c, ConvSpec{1, 1, 1});
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    return add(x, c2_(ctx, silu(c1_(ctx, x))));
  }

 private:
  Conv2dLayer<T> c1_, c2_;
};

/// Spatial pooling pyramid: adaptive average pools at fixed grids, each
/// 1x1-conv'd and bilinearly upsampled, concatenated with the input and
/// fused back to C channels. Grids larger than the input contribute zero
/// maps so the fusion width stays static.
template <typename T>
class SppBlock {
 public:
  SppBlock() = default;
  SppBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int c, std::vector<int> grids)
      : grids_(std::move(grids)) {
    for (size_t i = 0; i < grids_.size(); ++i)
      level_convs_.emplace_back(store, rng, name + ".level" + std::to_string(grids_[i]), 1, 1, c, c);
    fuse_ = Conv2dLayer<T>(store, rng, name + ".fuse", 1, 1, c * (1 + static_cast<int>(grids_.size())), c);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    const int h = x.height(), w = x.width();
    std::vector<Value<T>> parts{x};
    for (size_t i = 0; i < grids_.size(); ++i) {
      int g = grids_[i];
      if (g > h || g > w) {
        parts.push_back(Value<T>::constant(Tensor<T>::zeros({h, w, x.channels()})));
        continue;
      }
      Value<T> pooled = adaptive_avg_pool(x, g, g);
      pooled = level_convs_[i](ctx, pooled);
      parts.push_back(resize_bilinear_v(pooled, h, w));
    }
    return fuse_(ctx, concat_channels(parts));
  }

 private:
  std::vector<int> grids_;
  std::vector<Conv2dLayer<T>> level_convs_;
  Conv2dLayer<T> fuse_;
};

/// Texture recovery module: a chain of dilated 3x3 stages (widen to 2C,
/// SE-reweight, compress back to C, residual), closed by an SPP.
template <typename T>
class TrmBlock {
 public:
  TrmBlock() = default;
  TrmBlock(ParamStore<T>& store, Rng& rng, const std::string& name, int c,
           const std::vector<int>& dilations, int se_reduction, const std::vector<int>& spp_grids) {
    for (size_t i = 0; i < dilations.size(); ++i) {
      int d = dilations[i];
      std::string stage = name + ".d" + std::to_string(d);
      dil_.emplace_back(store, rng, stage + ".conv", 3, 3, c, 2 * c, ConvSpec{1, d, d});
      se_.emplace_back(store, rng, stage + ".se", 2 * c, se_reduction);
      compress_.emplace_back(store, rng, stage + ".compress", 3, 3, 2 * c, c, ConvSpec{1, 1, 1});
    }
    spp_ = SppBlock<T>(store, rng, name + ".spp", c, spp_grids);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    Value<T> cur = x;
    for (size_t i = 0; i < dil_.size(); ++i) {
      Value<T> y = silu(dil_[i](ctx, cur));
      y = se_[i](ctx, y);
      y = compress_[i](ctx, y);
      cur = add(cur, y);
    }
    return spp_(ctx, cur);
  }

 private:
  std::vector<Conv2dLayer<T>> dil_;
  std::vector<SeLayer<T>> se_;
  std::vector<Conv2dLayer<T>> compress_;
  SppBlock<T> spp_;
};

/// Contour head: upsample the low band and its deshaded counterpart to the
/// band resolution, concatenate with the band (9 channels), run residual
/// blocks, and project to a single gating channel. The projection starts at
/// constant 1 (zero weights, unit bias) so gating begins as identity.
template <typename T>
class ContourNet {
 public:
  ContourNet() = default;
  ContourNet(ParamStore<T>& store, Rng& rng, const std::string& name, int trunk, int blocks) {
    stem_ = Conv2dLayer<T>(store, rng, name + ".stem", 3, 3, 9, trunk, ConvSpec{1, 1, 1});
    for (int i = 0; i < blocks; ++i)
      res_.emplace_back(store, rng, name + ".res" + std::to_string(i), trunk);
    proj_ = Conv2dLayer<T>(store, rng, name + ".proj", 1, 1, trunk, 1, {}, Init::zero, true, 1.0);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& low_in, const Value<T>& low_out,
                      const Value<T>& band) const {
    check(low_in.tensor().same_shape(low_out.tensor()), "contour: low shapes differ");
    const int h = band.height(), w = band.width();
    Value<T> up_in = resize_bilinear_v(low_in, h, w);
    Value<T> up_out = resize_bilinear_v(low_out, h, w);
    Value<T> cur = silu(stem_(ctx, concat_channels<T>({up_in, up_out, band})));
    for (const auto& r : res_) cur = r(ctx, cur);
    return proj_(ctx, cur);
  }

  const Conv2dLayer<T>& proj() const { return proj_; }

 private:
  Conv2dLayer<T> stem_;
  std::vector<ResBlock<T>> res_;
  Conv2dLayer<T> proj_;
};

/// Doubles a contour: bilinear x2, then a TRM refinement added through a
/// zero-initialised projection (identity at init).
template <typename T>
class ExpandContour {
 public:
  ExpandContour() = default;
  ExpandContour(ParamStore<T>& store, Rng& rng, const std::string& name, int trunk,
                const std::vector<int>& dilations, int se_reduction, const std::vector<int>& spp_grids) {
    lift_ = Conv2dLayer<T>(store, rng, name + ".lift", 3, 3, 1, trunk, ConvSpec{1, 1, 1});
    trm_ = TrmBlock<T>(store, rng, name + ".trm", trunk, dilations, se_reduction, spp_grids);
    proj_ = Conv2dLayer<T>(store, rng, name + ".proj", 1, 1, trunk, 1, {}, Init::zero);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& contour) const {
    Value<T> up = resize_bilinear_v(contour, contour.height() * 2, contour.width() * 2);
    Value<T> t = silu(lift_(ctx, up));
    t = trm_(ctx, t);
    return add(up, proj_(ctx, t));
  }

 private:
  Conv2dLayer<T> lift_;
  TrmBlock<T> trm_;
  Conv2dLayer<T> proj_;
};

/// Low-frequency deshading branch. Output is the input base plus a learned
/// correction through a zero-initialised final conv, so it starts as
/// identity.
template <typename T>
class LowFreqBranch {
 public:
  LowFreqBranch() = default;
  LowFreqBranch(ParamStore<T>& store, Rng& rng, const std::string& name, int c, int n_dat, int heads,
                int unet_levels, int dfe_per_level, bool deformable) {
    stem_ = Conv2dLayer<T>(store, rng, name + ".stem", 3, 3, 3, c, ConvSpec{1, 1, 1});
    for (int i = 0; i < n_dat; ++i)
      stage1_.emplace_back(store, rng, name + ".dat1." + std::to_string(i), c, heads);
    taa1_ = TaaBlock<T>(store, rng, name + ".taa1", n_dat, c);
    unet_ = DfeUnet<T>(store, rng, name + ".unet", c, unet_levels, dfe_per_level, deformable);
    for (int i = 0; i < n_dat; ++i)
      stage2_.emplace_back(store, rng, name + ".dat2." + std::to_string(i), c, heads);
    taa2_ = TaaBlock<T>(store, rng, name + ".taa2", n_dat, c);
    final_ = Conv2dLayer<T>(store, rng, name + ".final", 3, 3, c, 3, ConvSpec{1, 1, 1}, Init::zero);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& low, AttnProbe* probe = nullptr) const {
    check(low.channels() == 3, "lowfreq: expects the 3-channel pyramid base");
    Value<T> cur = stem_(ctx, low);
    std::vector<Value<T>> feats;
    for (const auto& dat : stage1_) {
      cur = dat(ctx, cur, probe);
      feats.push_back(cur);
    }
    cur = taa1_(ctx, feats, probe);
    cur = unet_(ctx, cur);
    std::vector<Value<T>> feats2;
    for (const auto& dat : stage2_) {
      cur = dat(ctx, cur, probe);
      feats2.push_back(cur);
    }
    cur = taa2_(ctx, feats2, probe);
    return add(low, final_(ctx, cur));
  }

 private:
  Conv2dLayer<T> stem_, final_;
  std::vector<DatBlock<T>> stage1_, stage2_;
  TaaBlock<T> taa1_, taa2_;
  DfeUnet<T> unet_;
};

}  // namespace fsenet::nn
