#include <functional>

#include "doctest.h"
#include "fsenet/nn/loss.hpp"
#include "fsenet/nn/ops_attn.hpp"
#include "fsenet/nn/ops_conv.hpp"
#include "fsenet/nn/ops_resize.hpp"
#include "test_util.hpp"

using namespace fsenet;
using namespace fsenet::nn;
using testutil::fd_compare;
using testutil::random_tensor;

namespace {

// loss = mean(out * r) for a fixed random r; linear in out, so finite
// differences are accurate.
double weighted_mean(const Tensor<double>& out, const Tensor<double>& r) {
  double acc = 0;
  for (int64_t i = 0; i < out.numel(); ++i) acc += out.data()[i] * r.data()[i];
  return acc / static_cast<double>(out.numel());
}

Value<double> weighted_mean_v(const Value<double>& out, const Tensor<double>& r) {
  return mean_all(mul(out, Value<double>::constant(r)));
}

}  // namespace

TEST_CASE("elementwise and reduction op gradients") {
  Rng rng(21);
  Tensor<double> a = random_tensor<double>(rng, {5, 4, 3}, -1, 1);
  Tensor<double> b = random_tensor<double>(rng, {5, 4, 3}, 0.5, 2.0);

  auto run = [&](auto make_out, Tensor<double>& wrt) {
    Value<double> va = Value<double>::leaf(a, true);
    Value<double> vb = Value<double>::leaf(b, true);
    Value<double> out = make_out(va, vb);
    Rng rr(7);
    Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
    backward(weighted_mean_v(out, r));
    const Tensor<double>& g = (&wrt == &a) ? va.grad() : vb.grad();
    REQUIRE_FALSE(g.empty());
    Tensor<double> analytic = g;
    auto eval = [&]() {
      NoGradGuard ng;
      Value<double> xa = Value<double>::constant(a);
      Value<double> xb = Value<double>::constant(b);
      return weighted_mean(make_out(xa, xb).tensor(), r);
    };
    auto res = fd_compare(wrt.data(), analytic.data(), wrt.numel(), eval, rng, 20);
    CHECK(res.max_rel_err < 1e-6);
  };

  run([](auto x, auto y) { return add(x, y); }, a);
  run([](auto x, auto y) { return sub(x, y); }, b);
  run([](auto x, auto y) { return mul(x, y); }, a);
  run([](auto x, auto y) { return div(x, y); }, b);
  run([](auto x, auto y) { (void)y; return silu(x); }, a);
  run([](auto x, auto y) { (void)y; return sigmoid(x); }, a);
  run([](auto x, auto y) { (void)y; return scale(add_scalar(x, 0.3), -1.7); }, a);
  run([](auto x, auto y) { return concat_channels<double>({x, y}); }, a);
  run([](auto x, auto y) { (void)y; return slice_channels(x, 1, 2); }, a);
  run([](auto x, auto y) { (void)y; return crop_hw(x, 1, 1, 3, 2); }, a);
  run([](auto x, auto y) { (void)y; return global_avg_pool(x); }, a);
}

TEST_CASE("mul_channel, mul_map, linear_vec, layer_norm gradients") {
  Rng rng(22);
  Tensor<double> x = random_tensor<double>(rng, {4, 5, 3}, -1, 1);
  Tensor<double> s = random_tensor<double>(rng, {1, 1, 3}, -1, 1);
  Tensor<double> m = random_tensor<double>(rng, {4, 5, 1}, -1, 1);
  Tensor<double> w = random_tensor<double>(rng, {4, 3}, -1, 1);  // (cout, cin)
  Tensor<double> bias = random_tensor<double>(rng, {4}, -1, 1);
  Tensor<double> gamma = random_tensor<double>(rng, {1, 1, 3}, 0.5, 1.5);
  Tensor<double> beta = random_tensor<double>(rng, {1, 1, 3}, -0.5, 0.5);

  // `build` fills `leaves` in the same order as the wrts list.
  auto check_case = [&](auto build, std::vector<Tensor<double>*> wrts, double tol) {
    for (size_t j = 0; j < wrts.size(); ++j) {
      Tensor<double>* wrt = wrts[j];
      std::vector<Value<double>> leaves;
      Value<double> out = build(true, &leaves);
      REQUIRE(leaves.size() == wrts.size());
      Rng rr(99);
      Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
      backward(weighted_mean_v(out, r));
      REQUIRE_FALSE(leaves[j].grad().empty());
      Tensor<double> analytic = leaves[j].grad();
      auto eval = [&]() {
        NoGradGuard ng;
        std::vector<Value<double>> tmp;
        return weighted_mean(build(false, &tmp).tensor(), r);
      };
      auto res = fd_compare(wrt->data(), analytic.data(), wrt->numel(), eval, rng, 20);
      CHECK_MESSAGE(res.max_rel_err < tol, "analytic=", res.worst_analytic, " fd=", res.worst_numeric);
    }
  };

  check_case(
      [&](bool g, std::vector<Value<double>>* leaves) {
        Value<double> vx = Value<double>::leaf(x, g);
        Value<double> vs = Value<double>::leaf(s, g);
        leaves->assign({vx, vs});
        return mul_channel(vx, vs);
      },
      {&x, &s}, 1e-6);
  check_case(
      [&](bool g, std::vector<Value<double>>* leaves) {
        Value<double> vx = Value<double>::leaf(x, g);
        Value<double> vm = Value<double>::leaf(m, g);
        leaves->assign({vx, vm});
        return mul_map(vx, vm);
      },
      {&x, &m}, 1e-6);
  check_case(
      [&](bool g, std::vector<Value<double>>* leaves) {
        Value<double> vs = Value<double>::leaf(s, g);
        Value<double> vw = Value<double>::leaf(w, g);
        Value<double> vb = Value<double>::leaf(bias, g);
        leaves->assign({vs, vw, vb});
        return linear_vec(vs, vw, vb);
      },
      {&s, &w, &bias}, 1e-6);
  check_case(
      [&](bool g, std::vector<Value<double>>* leaves) {
        Value<double> vx = Value<double>::leaf(x, g);
        Value<double> vg = Value<double>::leaf(gamma, g);
        Value<double> vb = Value<double>::leaf(beta, g);
        leaves->assign({vx, vg, vb});
        return layer_norm(vx, vg, vb);
      },
      {&x, &gamma, &beta}, 1e-5);
}

TEST_CASE("simple_gate matches a brute-force product and halves channels") {
  Rng rng(23);
  Tensor<double> x = random_tensor<double>(rng, {8, 8, 6}, -1, 1);
  Value<double> out = simple_gate(Value<double>::constant(x));
  REQUIRE(out.shape() == std::vector<int>({8, 8, 3}));
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx)
      for (int c = 0; c < 3; ++c)
        CHECK(out.tensor().at(y, xx, c) ==
              doctest::Approx(x.at(y, xx, c) * x.at(y, xx, c + 3)).epsilon(1e-12));
  CHECK_THROWS_AS(simple_gate(Value<double>::constant(random_tensor<double>(rng, {2, 2, 5}))),
                  ShapeError);

  Tensor<double> twos = Tensor<double>::full({4, 4, 8}, 2.0);
  Value<double> g = simple_gate(Value<double>::constant(twos));
  for (int64_t i = 0; i < g.tensor().numel(); ++i) CHECK(g.tensor().data()[i] == doctest::Approx(4.0));

  Tensor<double> zero_half = Tensor<double>::full({4, 4, 8}, 1.0);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx)
      for (int c = 4; c < 8; ++c) zero_half.at(y, xx, c) = 0.0;
  Value<double> z = simple_gate(Value<double>::constant(zero_half));
  CHECK(z.tensor().max_abs() == 0.0);
}

namespace {

struct ConvCase {
  ConvSpec spec;
  int kh, kw, cin, cout, h, w;
};

void conv_fd_case(const ConvCase& c, Rng& rng) {
  Tensor<double> x = random_tensor<double>(rng, {c.h, c.w, c.cin}, -1, 1);
  Tensor<double> w = random_tensor<double>(rng, {c.kh, c.kw, c.cin, c.cout}, -1, 1);
  Tensor<double> b = random_tensor<double>(rng, {c.cout}, -1, 1);

  Value<double> vx = Value<double>::leaf(x, true);
  Value<double> vw = Value<double>::leaf(w, true);
  Value<double> vb = Value<double>::leaf(b, true);
  Value<double> out = conv2d(vx, vw, vb, c.spec);
  Rng rr(1234);
  Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
  backward(weighted_mean_v(out, r));

  auto eval = [&]() {
    NoGradGuard ng;
    return weighted_mean(
        conv2d(Value<double>::constant(x), Value<double>::constant(w), Value<double>::constant(b), c.spec)
            .tensor(),
        r);
  };
  for (auto [buf, grad] : {std::pair{&x, &vx}, std::pair{&w, &vw}, std::pair{&b, &vb}}) {
    auto res = fd_compare(buf->data(), grad->grad().data(), buf->numel(), eval, rng, 16);
    CHECK_MESSAGE(res.max_rel_err < 1e-6, "conv fd mismatch: analytic=", res.worst_analytic,
                  " fd=", res.worst_numeric);
  }
}

}  // namespace

TEST_CASE("conv2d gradients across stride, dilation, padding") {
  Rng rng(31);
  conv_fd_case({{1, 1, 1}, 3, 3, 3, 4, 7, 6}, rng);   // same conv
  conv_fd_case({{2, 1, 1}, 3, 3, 2, 3, 8, 8}, rng);   // strided
  conv_fd_case({{1, 2, 2}, 3, 3, 2, 2, 9, 9}, rng);   // dilated
  conv_fd_case({{1, 1, 0}, 1, 1, 4, 5, 5, 5}, rng);   // pointwise
}

TEST_CASE("conv2d single-kernel arithmetic: 3x3x3->8 with bias has 224 parameters") {
  // 3*3*3*8 + 8
  Tensor<float> w({3, 3, 3, 8});
  Tensor<float> b({8});
  CHECK(w.numel() + b.numel() == 224);
}

TEST_CASE("depthwise_conv gradients") {
  Rng rng(32);
  Tensor<double> x = random_tensor<double>(rng, {7, 6, 4}, -1, 1);
  Tensor<double> w = random_tensor<double>(rng, {3, 3, 4}, -1, 1);
  Tensor<double> b = random_tensor<double>(rng, {4}, -1, 1);
  Value<double> vx = Value<double>::leaf(x, true);
  Value<double> vw = Value<double>::leaf(w, true);
  Value<double> vb = Value<double>::leaf(b, true);
  Value<double> out = depthwise_conv(vx, vw, vb, ConvSpec{1, 1, 1});
  Rng rr(77);
  Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
  backward(weighted_mean_v(out, r));
  auto eval = [&]() {
    NoGradGuard ng;
    return weighted_mean(depthwise_conv(Value<double>::constant(x), Value<double>::constant(w),
                                        Value<double>::constant(b), ConvSpec{1, 1, 1})
                             .tensor(),
                         r);
  };
  for (auto [buf, v] : {std::pair{&x, &vx}, std::pair{&w, &vw}, std::pair{&b, &vb}}) {
    auto res = fd_compare(buf->data(), v->grad().data(), buf->numel(), eval, rng, 16);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("dilated conv impulse responses have support 2*rate+1") {
  for (int rate : {1, 2, 4, 8}) {
    const int n = 2 * (2 * rate + 1) + 7;
    Tensor<double> x({n, n, 1});
    const int mid = n / 2;
    x.at(mid, mid, 0) = 1.0;
    Tensor<double> w = Tensor<double>::full({3, 3, 1, 1}, 1.0);
    NoGradGuard ng;
    Value<double> out = conv2d(Value<double>::constant(x), Value<double>::constant(w), {},
                               ConvSpec{1, rate, rate});
    REQUIRE(out.height() == n);
    int ymin = n, ymax = -1, xmin = n, xmax = -1;
    for (int y = 0; y < n; ++y)
      for (int xx = 0; xx < n; ++xx)
        if (out.tensor().at(y, xx, 0) != 0.0) {
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
          xmin = std::min(xmin, xx);
          xmax = std::max(xmax, xx);
        }
    CHECK(ymax - ymin + 1 == 2 * rate + 1);
    CHECK(xmax - xmin + 1 == 2 * rate + 1);
    if (rate > 1) {
      // holes: nearest ring inside the support is zero
      CHECK(out.tensor().at(mid + 1, mid + 1, 0) == 0.0);
    }
    // rate 1 behaves like a dense 3x3: no interior zeros
    if (rate == 1) CHECK(out.tensor().at(mid + 1, mid + 1, 0) != 0.0);
  }
}

TEST_CASE("fixed_blur_valid gradient and adjointness") {
  Rng rng(33);
  Tensor<double> k = random_tensor<double>(rng, {3, 3}, 0.0, 1.0);
  Tensor<double> x = random_tensor<double>(rng, {8, 7, 2}, -1, 1);
  Value<double> vx = Value<double>::leaf(x, true);
  Value<double> out = fixed_blur_valid(vx, k);
  REQUIRE(out.height() == 6);
  REQUIRE(out.width() == 5);
  Rng rr(88);
  Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
  backward(weighted_mean_v(out, r));
  auto eval = [&]() {
    NoGradGuard ng;
    return weighted_mean(fixed_blur_valid(Value<double>::constant(x), k).tensor(), r);
  };
  auto res = fd_compare(x.data(), vx.grad().data(), x.numel(), eval, rng, 30);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("deform_conv3x3 equals a standard conv at zero offsets and unit modulation") {
  Rng rng(34);
  Tensor<double> x = random_tensor<double>(rng, {8, 9, 3}, -1, 1);
  Tensor<double> w = random_tensor<double>(rng, {3, 3, 3, 4}, -1, 1);
  Tensor<double> b = random_tensor<double>(rng, {4}, -1, 1);
  Tensor<double> om = Tensor<double>::zeros({8, 9, 27});  // offsets 0, logits 0 -> modulation 1
  NoGradGuard ng;
  Value<double> got = deform_conv3x3(Value<double>::constant(x), Value<double>::constant(om),
                                     Value<double>::constant(w), Value<double>::constant(b));
  Value<double> expect = conv2d(Value<double>::constant(x), Value<double>::constant(w),
                                Value<double>::constant(b), ConvSpec{1, 1, 1});
  CHECK(max_abs_diff(got.tensor(), expect.tensor()) < 1e-12);
}

TEST_CASE("deform_conv3x3 gradients with non-integer offsets") {
  Rng rng(35);
  const int h = 6, w = 6, cin = 2, cout = 3;
  Tensor<double> x = random_tensor<double>(rng, {h, w, cin}, -1, 1);
  Tensor<double> wt = random_tensor<double>(rng, {3, 3, cin, cout}, -1, 1);
  Tensor<double> b = random_tensor<double>(rng, {cout}, -1, 1);
  Tensor<double> om({h, w, 27});
  for (int64_t i = 0; i < om.numel(); ++i) {
    int ch = static_cast<int>(i % 27);
    if (ch < 18) {
      double mag = rng.uniform(0.1, 0.6);
      om.data()[i] = rng.coin(0.5) ? mag : -mag;
    } else {
      om.data()[i] = rng.uniform(-1.0, 1.0);  // mask logits
    }
  }
  Value<double> vx = Value<double>::leaf(x, true);
  Value<double> vo = Value<double>::leaf(om, true);
  Value<double> vw = Value<double>::leaf(wt, true);
  Value<double> vb = Value<double>::leaf(b, true);
  Value<double> out = deform_conv3x3(vx, vo, vw, vb);
  Rng rr(55);
  Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
  backward(weighted_mean_v(out, r));
  auto eval = [&]() {
    NoGradGuard ng;
    return weighted_mean(deform_conv3x3(Value<double>::constant(x), Value<double>::constant(om),
                                        Value<double>::constant(wt), Value<double>::constant(b))
                             .tensor(),
                         r);
  };
  for (auto [buf, v] : {std::pair{&x, &vx}, std::pair{&om, &vo}, std::pair{&wt, &vw}, std::pair{&b, &vb}}) {
    auto res = fd_compare(buf->data(), v->grad().data(), buf->numel(), eval, rng, 24);
    CHECK_MESSAGE(res.max_rel_err < 1e-5, "deform fd: analytic=", res.worst_analytic,
                  " fd=", res.worst_numeric);
  }
}

TEST_CASE("axial attention: rows sum to 1, output shape preserved, gradients") {
  Rng rng(36);
  const int h = 5, w = 4, c = 6, heads = 2;
  Tensor<double> q = random_tensor<double>(rng, {h, w, c}, -1, 1);
  Tensor<double> k = random_tensor<double>(rng, {h, w, c}, -1, 1);
  Tensor<double> v = random_tensor<double>(rng, {h, w, c}, -1, 1);

  for (Axis axis : {Axis::height, Axis::width}) {
    AttnProbe probe;
    Value<double> vq = Value<double>::leaf(q, true);
    Value<double> vk = Value<double>::leaf(k, true);
    Value<double> vv = Value<double>::leaf(v, true);
    Value<double> out = axial_attention(vq, vk, vv, axis, heads, &probe);
    REQUIRE(out.shape() == std::vector<int>({h, w, c}));
    CHECK(probe.max_row_sum_err < 1e-12);
    CHECK(probe.rows_seen == (axis == Axis::height ? w * heads * h : h * heads * w));

    Rng rr(66);
    Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
    backward(weighted_mean_v(out, r));
    auto eval = [&]() {
      NoGradGuard ng;
      return weighted_mean(axial_attention(Value<double>::constant(q), Value<double>::constant(k),
                                           Value<double>::constant(v), axis, heads)
                               .tensor(),
                           r);
    };
    for (auto [buf, val] : {std::pair{&q, &vq}, std::pair{&k, &vk}, std::pair{&v, &vv}}) {
      auto res = fd_compare(buf->data(), val->grad().data(), buf->numel(), eval, rng, 20);
      CHECK_MESSAGE(res.max_rel_err < 1e-5, "axial fd: analytic=", res.worst_analytic,
                    " fd=", res.worst_numeric);
    }
  }
}

TEST_CASE("layer attention: N=1 degenerates to A=[[1]], gradients including alpha") {
  Rng rng(37);
  const int h = 4, w = 3, c = 5;
  SUBCASE("single layer is a pass-through mix") {
    Tensor<double> q = random_tensor<double>(rng, {h, w, c}, -1, 1);
    Tensor<double> k = random_tensor<double>(rng, {h, w, c}, -1, 1);
    Tensor<double> v = random_tensor<double>(rng, {h, w, c}, -1, 1);
    AttnProbe probe;
    NoGradGuard ng;
    Value<double> out = layer_attention(Value<double>::constant(q), Value<double>::constant(k),
                                        Value<double>::constant(v),
                                        Value<double>::constant(Tensor<double>::scalar(1.0)), 1, &probe);
    REQUIRE(probe.matrix.size() == 1);
    CHECK(probe.matrix[0][0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(max_abs_diff(out.tensor(), v) == 0.0);
  }

  SUBCASE("gradients with N=3") {
    const int n = 3, nc = n * c;
    Tensor<double> q = random_tensor<double>(rng, {h, w, nc}, -0.3, 0.3);
    Tensor<double> k = random_tensor<double>(rng, {h, w, nc}, -0.3, 0.3);
    Tensor<double> v = random_tensor<double>(rng, {h, w, nc}, -1, 1);
    Tensor<double> alpha = Tensor<double>::scalar(1.3);
    Value<double> vq = Value<double>::leaf(q, true);
    Value<double> vk = Value<double>::leaf(k, true);
    Value<double> vv = Value<double>::leaf(v, true);
    Value<double> va = Value<double>::leaf(alpha, true);
    AttnProbe probe;
    Value<double> out = layer_attention(vq, vk, vv, va, n, &probe);
    CHECK(probe.max_row_sum_err < 1e-12);
    Rng rr(44);
    Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
    backward(weighted_mean_v(out, r));
    auto eval = [&]() {
      NoGradGuard ng;
      return weighted_mean(layer_attention(Value<double>::constant(q), Value<double>::constant(k),
                                           Value<double>::constant(v), Value<double>::constant(alpha), n)
                               .tensor(),
                           r);
    };
    for (auto [buf, val] :
         {std::pair{&q, &vq}, std::pair{&k, &vk}, std::pair{&v, &vv}, std::pair{&alpha, &va}}) {
      auto res = fd_compare(buf->data(), val->grad().data(), buf->numel(), eval, rng, 20);
      CHECK_MESSAGE(res.max_rel_err < 1e-5, "layer attn fd: analytic=", res.worst_analytic,
                    " fd=", res.worst_numeric);
    }
  }
}

TEST_CASE("resize_bilinear_v and adaptive_avg_pool gradients") {
  Rng rng(38);
  Tensor<double> x = random_tensor<double>(rng, {6, 5, 2}, -1, 1);

  SUBCASE("resize") {
    Value<double> vx = Value<double>::leaf(x, true);
    Value<double> out = resize_bilinear_v(vx, 11, 9);
    Rng rr(11);
    Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
    backward(weighted_mean_v(out, r));
    auto eval = [&]() {
      NoGradGuard ng;
      return weighted_mean(resize_bilinear_v(Value<double>::constant(x), 11, 9).tensor(), r);
    };
    auto res = fd_compare(x.data(), vx.grad().data(), x.numel(), eval, rng, 30);
    CHECK(res.max_rel_err < 1e-6);
  }

  SUBCASE("adaptive pool: 1x1 equals the global mean, grads correct") {
    NoGradGuard ng0;
    Value<double> pooled = adaptive_avg_pool(Value<double>::constant(x), 1, 1);
    for (int c = 0; c < 2; ++c) {
      double mean = 0;
      for (int y = 0; y < 6; ++y)
        for (int xx = 0; xx < 5; ++xx) mean += x.at(y, xx, c);
      mean /= 30.0;
      CHECK(pooled.tensor().at(0, 0, c) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  SUBCASE("adaptive pool grads") {
    Value<double> vx = Value<double>::leaf(x, true);
    Value<double> out = adaptive_avg_pool(vx, 3, 2);
    Rng rr(12);
    Tensor<double> r = random_tensor<double>(rr, out.tensor().shape(), -1, 1);
    backward(weighted_mean_v(out, r));
    auto eval = [&]() {
      NoGradGuard ng;
      return weighted_mean(adaptive_avg_pool(Value<double>::constant(x), 3, 2).tensor(), r);
    };
    auto res = fd_compare(x.data(), vx.grad().data(), x.numel(), eval, rng, 30);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("pyr_up_v adjointness: <Ax, y> == <x, A^T y>") {
  Rng rng(39);
  Tensor<double> x = random_tensor<double>(rng, {6, 7, 2}, -1, 1);
  Tensor<double> y = random_tensor<double>(rng, {12, 14, 2}, -1, 1);

  Value<double> vx = Value<double>::leaf(x, true);
  Value<double> up = pyr_up_v(vx);
  double lhs = 0;
  for (int64_t i = 0; i < up.tensor().numel(); ++i) lhs += up.tensor().data()[i] * y.data()[i];
  backward(up, y);  // seeds grad with y, so vx.grad() = A^T y
  double rhs = 0;
  for (int64_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * vx.grad().data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("smooth_l1 value and gradient") {
  Rng rng(40);
  SUBCASE("closed form in the quadratic regime") {
    Tensor<double> pred = Tensor<double>::full({4, 4, 1}, 0.5);
    Tensor<double> target = Tensor<double>::full({4, 4, 1}, 0.6);
    NoGradGuard ng;
    Value<double> l = smooth_l1(Value<double>::constant(pred), target, 1.0);
    CHECK(l.tensor().data()[0] == doctest::Approx(0.005).epsilon(1e-12));
  }
  SUBCASE("linear regime above beta") {
    Tensor<double> pred = Tensor<double>::full({2, 2, 1}, 2.0);
    Tensor<double> target = Tensor<double>::full({2, 2, 1}, 0.0);
    NoGradGuard ng;
    Value<double> l = smooth_l1(Value<double>::constant(pred), target, 1.0);
    CHECK(l.tensor().data()[0] == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("gradient") {
    Tensor<double> pred = random_tensor<double>(rng, {5, 5, 2}, -0.5, 1.5);
    Tensor<double> target = random_tensor<double>(rng, {5, 5, 2}, 0, 1);
    Value<double> vp = Value<double>::leaf(pred, true);
    backward(smooth_l1(vp, target, 1.0));
    auto eval = [&]() {
      NoGradGuard ng;
      return smooth_l1(Value<double>::constant(pred), target, 1.0).tensor().data()[0];
    };
    auto res = fd_compare(pred.data(), vp.grad().data(), pred.numel(), eval, rng, 30);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("ssim loss graph: identical images give 1, gradient matches FD") {
  Rng rng(41);
  Tensor<double> target = random_tensor<double>(rng, {16, 16, 2}, 0, 1);
  SUBCASE("self similarity is exactly 1") {
    NoGradGuard ng;
    Value<double> s = ssim_mean_v(Value<double>::constant(target), target);
    CHECK(s.tensor().data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("gradient") {
    Tensor<double> pred = random_tensor<double>(rng, {16, 16, 2}, 0, 1);
    Value<double> vp = Value<double>::leaf(pred, true);
    backward(ssim_mean_v(vp, target));
    auto eval = [&]() {
      NoGradGuard ng;
      return ssim_mean_v(Value<double>::constant(pred), target).tensor().data()[0];
    };
    auto res = fd_compare(pred.data(), vp.grad().data(), pred.numel(), eval, rng, 40);
    CHECK(res.max_rel_err < 1e-5);
  }
}

TEST_CASE("total loss: zero iff equal, components add up, gradient vs FD") {
  Rng rng(42);
  Tensor<double> target = random_tensor<double>(rng, {16, 16, 3}, 0, 1);
  SUBCASE("identical images give exactly zero") {
    NoGradGuard ng;
    auto parts = total_loss(Value<double>::constant(target), target, 0.4);
    CHECK(parts.total.tensor().data()[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(parts.l1 == 0.0);
  }
  SUBCASE("nonnegative and positive when different") {
    Tensor<double> pred = random_tensor<double>(rng, {16, 16, 3}, 0, 1);
    NoGradGuard ng;
    auto parts = total_loss(Value<double>::constant(pred), target, 0.4);
    CHECK(parts.total.tensor().data()[0] > 0.0);
    CHECK(parts.total.tensor().data()[0] ==
          doctest::Approx(parts.l1 + parts.ssim_term).epsilon(1e-12));
  }
  SUBCASE("gradient with ssim term") {
    Tensor<double> pred = random_tensor<double>(rng, {16, 16, 3}, 0, 1);
    Value<double> vp = Value<double>::leaf(pred, true);
    auto parts = total_loss(vp, target, 0.4);
    backward(parts.total);
    auto eval = [&]() {
      NoGradGuard ng;
      return total_loss(Value<double>::constant(pred), target, 0.4).total.tensor().data()[0];
    };
    auto res = fd_compare(pred.data(), vp.grad().data(), pred.numel(), eval, rng, 30);
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("gradient at lambda 0 on an 8x8 patch") {
    Tensor<double> pred = random_tensor<double>(rng, {8, 8, 3}, 0, 1);
    Tensor<double> tgt = random_tensor<double>(rng, {8, 8, 3}, 0, 1);
    Value<double> vp = Value<double>::leaf(pred, true);
    auto parts = total_loss(vp, tgt, 0.0);
    backward(parts.total);
    auto eval = [&]() {
      NoGradGuard ng;
      return total_loss(Value<double>::constant(pred), tgt, 0.0).total.tensor().data()[0];
    };
    auto res = fd_compare(pred.data(), vp.grad().data(), pred.numel(), eval, rng, 30);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("no-grad mode records nothing") {
  Rng rng(43);
  Tensor<double> a = random_tensor<double>(rng, {3, 3, 2});
  NoGradGuard ng;
  Value<double> v = Value<double>::leaf(a, true);
  CHECK_FALSE(v.requires_grad());
  Value<double> out = silu(v);
  CHECK_FALSE(out.requires_grad());
}
