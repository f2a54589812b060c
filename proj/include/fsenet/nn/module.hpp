#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fsenet/nn/ops_conv.hpp"

namespace fsenet::nn {

/// Flat named parameter registry. Modules hold indices into it; grads live
/// alongside values so the optimizer can walk entries in registration order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  int add(const std::string& name, Tensor<T> init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    int id = static_cast<int>(entries_.size());
    by_name_[name] = id;
    entries_.push_back({name, std::move(init), {}});
    return id;
  }

  Entry& entry(int id) { return entries_[static_cast<size_t>(id)]; }
  const Entry& entry(int id) const { return entries_[static_cast<size_t>(id)]; }
  int find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }
  Entry& by_name(const std::string& name) {
    int id = find(name);
    if (id < 0) throw ConfigError("unknown parameter: " + name);
    return entries_[static_cast<size_t>(id)];
  }

  size_t size() const { return entries_.size(); }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad = {};
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

/// Per-forward binding of store entries to graph leaves. Reusing the context
/// across one forward+backward keeps each parameter a single node, so grads
/// accumulate correctly even when a module is applied twice.
template <typename T>
class PassContext {
 public:
  explicit PassContext(ParamStore<T>* store, bool train = false) : store_(store), train_(train) {}

  Value<T> param(int id) {
    auto it = bound_.find(id);
    if (it != bound_.end()) return it->second;
    Value<T> v = Value<T>::leaf(store_->entry(id).value, train_);
    bound_.emplace(id, v);
    return v;
  }

  /// Moves accumulated leaf grads into the store (in place, += semantics).
  void harvest_grads() {
    for (auto& [id, v] : bound_) {
      if (!v.requires_grad() || v.grad().empty()) continue;
      auto& e = store_->entry(id);
      if (e.grad.empty()) e.grad = Tensor<T>::zeros(e.value.shape());
      const Tensor<T>& g = v.grad();
      for (int64_t i = 0; i < g.numel(); ++i) e.grad.data()[i] += g.data()[i];
    }
  }

  ParamStore<T>* store() { return store_; }
  bool training() const { return train_; }

 private:
  ParamStore<T>* store_;
  bool train_;
  std::unordered_map<int, Value<T>> bound_;
};

enum class Init { he, zero };

template <typename T>
Tensor<T> he_normal(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor<T> t(std::move(shape));
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data_) v = static_cast<T>(rng.normal(0.0, std));
  return t;
}

/// 2D convolution layer; `pad` defaults to "same" for stride 1.
template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& store, Rng& rng, const std::string& name, int kh, int kw, int cin,
              int cout, ConvSpec spec = {}, Init init = Init::he, bool bias = true,
              double bias_init = 0.0)
      : spec_(spec) {
    Tensor<T> w = init == Init::he ? he_normal<T>(rng, {kh, kw, cin, cout}, kh * kw * cin)
                                   : Tensor<T>::zeros({kh, kw, cin, cout});
    w_ = store.add(name + ".weight", std::move(w));
    if (bias) b_ = store.add(name + ".bias", Tensor<T>::full({cout}, static_cast<T>(bias_init)));
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    return conv2d(x, ctx.param(w_), b_ >= 0 ? ctx.param(b_) : Value<T>{}, spec_);
  }

  int weight_id() const { return w_; }
  int bias_id() const { return b_; }

 private:
  int w_ = -1, b_ = -1;
  ConvSpec spec_;
};

template <typename T>
class DepthwiseLayer {
 public:
  DepthwiseLayer() = default;
  DepthwiseLayer(ParamStore<T>& store, Rng& rng, const std::string& name, int k, int c,
                 ConvSpec spec = {}, Init init = Init::he, bool bias = true)
      : spec_(spec) {
    Tensor<T> w = init == Init::he ? he_normal<T>(rng, {k, k, c}, k * k) : Tensor<T>::zeros({k, k, c});
    w_ = store.add(name + ".weight", std::move(w));
    if (bias) b_ = store.add(name + ".bias", Tensor<T>::zeros({c}));
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    return depthwise_conv(x, ctx.param(w_), b_ >= 0 ? ctx.param(b_) : Value<T>{}, spec_);
  }

 private:
  int w_ = -1, b_ = -1;
  ConvSpec spec_;
};

template <typename T>
class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& store, const std::string& name, int c) {
    gamma_ = store.add(name + ".gamma", Tensor<T>::full({1, 1, c}, T(1)));
    beta_ = store.add(name + ".beta", Tensor<T>::zeros({1, 1, c}));
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    return layer_norm(x, ctx.param(gamma_), ctx.param(beta_));
  }

 private:
  int gamma_ = -1, beta_ = -1;
};

/// Simplified channel attention: x scaled per channel by W * pool(x).
template <typename T>
class ScaLayer {
 public:
  ScaLayer() = default;
  ScaLayer(ParamStore<T>& store, Rng& rng, const std::string& name, int c) {
    Tensor<T> w({c, c});
    double std = 1.0 / std::sqrt(static_cast<double>(c));
    for (auto& v : w.data_) v = static_cast<T>(rng.normal(0.0, std));
    w_ = store.add(name + ".weight", std::move(w));
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    return mul_channel(x, linear_vec(global_avg_pool(x), ctx.param(w_)));
  }

  int weight_id() const { return w_; }

 private:
  int w_ = -1;
};

/// Squeeze-and-excitation channel gate with the usual bottleneck.
template <typename T>
class SeLayer {
 public:
  SeLayer() = default;
  SeLayer(ParamStore<T>& store, Rng& rng, const std::string& name, int c, int reduction) {
    int mid = std::max(1, c / reduction);
    Tensor<T> w1({mid, c});
    for (auto& v : w1.data_) v = static_cast<T>(rng.normal(0.0, std::sqrt(2.0 / c)));
    w1_ = store.add(name + ".fc1.weight", std::move(w1));
    b1_ = store.add(name + ".fc1.bias", Tensor<T>::zeros({mid}));
    Tensor<T> w2({c, mid});
    for (auto& v : w2.data_) v = static_cast<T>(rng.normal(0.0, std::sqrt(2.0 / mid)));
    w2_ = store.add(name + ".fc2.weight", std::move(w2));
    b2_ = store.add(name + ".fc2.bias", Tensor<T>::zeros({c}));
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    Value<T> s = global_avg_pool(x);
    Value<T> hidden = silu(linear_vec(s, ctx.param(w1_), ctx.param(b1_)));
    Value<T> gate = sigmoid(linear_vec(hidden, ctx.param(w2_), ctx.param(b2_)));
    return mul_channel(x, gate);
  }

  int fc2_bias_id() const { return b2_; }

 private:
  int w1_ = -1, b1_ = -1, w2_ = -1, b2_ = -1;
};

/// 3x3 modulated deformable convolution with a zero-initialised offset/mask
/// predictor. With `deformable=false` the layer degrades to a plain 3x3
/// convolution over the same weights (documented approximation).
template <typename T>
class DeformConvLayer {
 public:
  DeformConvLayer() = default;
  DeformConvLayer(ParamStore<T>& store, Rng& rng, const std::string& name, int cin, int cout,
                  bool deformable)
      : deformable_(deformable) {
    w_ = store.add(name + ".weight", he_normal<T>(rng, {3, 3, cin, cout}, 9 * cin));
    b_ = store.add(name + ".bias", Tensor<T>::zeros({cout}));
    if (deformable_)
      predictor_ = Conv2dLayer<T>(store, rng, name + ".offset", 3, 3, cin, 27, ConvSpec{1, 1, 1},
                                  Init::zero, true);
  }

  Value<T> operator()(PassContext<T>& ctx, const Value<T>& x) const {
    Value<T> w = ctx.param(w_);
    Value<T> b = ctx.param(b_);
    if (!deformable_) return conv2d(x, w, b, ConvSpec{1, 1, 1});
    return deform_conv3x3(x, predictor_(ctx, x), w, b);
  }

  int weight_id() const { return w_; }
  int bias_id() const { return b_; }
  const Conv2dLayer<T>& predictor() const { return predictor_; }
  bool deformable() const { return deformable_; }

 private:
  int w_ = -1, b_ = -1;
  Conv2dLayer<T> predictor_;
  bool deformable_ = false;
};

}  // namespace fsenet::nn
