#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"

namespace ad = dsmap::ad;
using dsmap::Rng;
using dsmap::ShapeError;
using dsmap::Tensor;

namespace {

using Builder = std::function<ad::Value(const std::vector<ad::Value>&)>;

double forward_val(const Builder& f, const std::vector<Tensor>& xs) {
    std::vector<ad::Value> vs;
    vs.reserve(xs.size());
    for (const auto& t : xs) vs.push_back(ad::constant(t));
    return f(vs).val()[0];
}

// Worst relative mismatch between the tape gradient and a central
// finite difference, over every element of every input.
double grad_check(const Builder& f, std::vector<Tensor> xs, double h = 1e-5) {
    std::vector<ad::Value> vs;
    vs.reserve(xs.size());
    for (const auto& t : xs) vs.push_back(ad::leaf(t));
    ad::Value out = f(vs);
    REQUIRE(out.val().numel() == 1);
    ad::backward(out);
    double worst = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        for (int64_t j = 0; j < xs[i].numel(); ++j) {
            const double keep = xs[i][j];
            xs[i][j] = keep + h;
            const double fp = forward_val(f, xs);
            xs[i][j] = keep - h;
            const double fm = forward_val(f, xs);
            xs[i][j] = keep;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = vs[i].grad()[j];
            const double rel =
                std::abs(num - ana) / std::max({1e-3, std::abs(num), std::abs(ana)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Uniform in [-1, -0.2] u [0.2, 1]: keeps elements away from the kinks
// of relu / abs so finite differences stay one sided.
Tensor rand_off_zero(Rng& rng, std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double mag = 0.2 + 0.8 * rng.uniform();
        t[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

Tensor rand_normal(Rng& rng, std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    rng.fill_normal(t);
    return t;
}

constexpr double kGradTol = 1e-6;

}  // namespace

// ------------------------------------------------------------ forward oracles

namespace {

// Direct seven-loop convolution, written independently of the library's
// im2col path.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
                   int64_t pad) {
    const int64_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    Tensor y({B, Co, Ho, Wo});
    for (int64_t s = 0; s < B; ++s)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t oy = 0; oy < Ho; ++oy)
                for (int64_t ox = 0; ox < Wo; ++ox) {
                    double acc = b[co];
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * stride + ky - pad;
                                const int64_t ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x.at(s, ci, iy, ix) * w.at(co, ci, ky, kx);
                            }
                    y.at(s, co, oy, ox) = acc;
                }
    return y;
}

}  // namespace

TEST_CASE("conv2d forward matches a direct loop") {
    Rng rng(301);
    struct Cfg {
        int64_t k, s, p;
    };
    for (Cfg c : {Cfg{3, 1, 1}, Cfg{4, 2, 1}, Cfg{7, 1, 3}, Cfg{1, 1, 0}, Cfg{5, 1, 2}}) {
        Tensor x = rand_normal(rng, {2, 3, 6, 7});
        Tensor w = rand_normal(rng, {4, 3, c.k, c.k});
        Tensor b = rand_normal(rng, {4});
        ad::Value y = ad::conv2d(ad::constant(x), ad::constant(w), ad::constant(b), c.s, c.p);
        Tensor ref = conv_oracle(x, w, b, c.s, c.p);
        REQUIRE(y.val().same_shape(ref));
        for (int64_t i = 0; i < ref.numel(); ++i)
            CHECK(y.val()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d output sizes follow the padded formula") {
    Rng rng(302);
    Tensor x = rand_normal(rng, {1, 2, 32, 32});
    Tensor w = rand_normal(rng, {5, 2, 4, 4});
    Tensor b(std::vector<int64_t>{5});
    ad::Value y = ad::conv2d(ad::constant(x), ad::constant(w), ad::constant(b), 2, 1);
    CHECK(y.val().dim(2) == 16);
    CHECK(y.val().dim(3) == 16);
}

TEST_CASE("linear forward matches a direct loop") {
    Rng rng(303);
    Tensor x = rand_normal(rng, {3, 5});
    Tensor w = rand_normal(rng, {4, 5});
    Tensor b = rand_normal(rng, {4});
    ad::Value y = ad::linear(ad::constant(x), ad::constant(w), ad::constant(b));
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 4; ++j) {
            double acc = b[j];
            for (int64_t k = 0; k < 5; ++k) acc += x.at(i, k) * w.at(j, k);
            CHECK(y.val().at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("instance_norm normalizes each sample channel plane") {
    Rng rng(304);
    Tensor x = rand_normal(rng, {2, 3, 4, 5});
    x.scale(3.0);
    ad::Value y = ad::instance_norm(ad::constant(x));
    const int64_t m = 4 * 5;
    for (int64_t b = 0; b < 2; ++b)
        for (int64_t c = 0; c < 3; ++c) {
            double s1 = 0.0, s2 = 0.0;
            for (int64_t i = 0; i < 4; ++i)
                for (int64_t j = 0; j < 5; ++j) {
                    const double v = y.val().at(b, c, i, j);
                    s1 += v;
                    s2 += v * v;
                }
            CHECK(s1 / m == doctest::Approx(0.0).epsilon(1e-10));
            CHECK(s2 / m == doctest::Approx(1.0).epsilon(1e-4));  // eps shrinks var slightly
        }
}

TEST_CASE("layer_norm_chw normalizes each sample") {
    Rng rng(305);
    Tensor x = rand_normal(rng, {3, 2, 4, 4});
    x.scale(2.0);
    ad::Value y = ad::layer_norm_chw(ad::constant(x));
    const int64_t m = 2 * 4 * 4;
    for (int64_t b = 0; b < 3; ++b) {
        double s1 = 0.0, s2 = 0.0;
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t i = 0; i < 4; ++i)
                for (int64_t j = 0; j < 4; ++j) {
                    const double v = y.val().at(b, c, i, j);
                    s1 += v;
                    s2 += v * v;
                }
        CHECK(s1 / m == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(s2 / m == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("upsample_nearest2 repeats pixels") {
    Tensor x({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    ad::Value y = ad::upsample_nearest2(ad::constant(x));
    REQUIRE(y.val().dim(2) == 4);
    REQUIRE(y.val().dim(3) == 4);
    CHECK(y.val().at(0, 0, 0, 0) == 1.0);
    CHECK(y.val().at(0, 0, 0, 1) == 1.0);
    CHECK(y.val().at(0, 0, 1, 1) == 1.0);
    CHECK(y.val().at(0, 0, 0, 2) == 2.0);
    CHECK(y.val().at(0, 0, 3, 3) == 4.0);
    CHECK(y.val().at(0, 0, 2, 1) == 3.0);
}

TEST_CASE("global_avg_pool averages each plane") {
    Tensor x({1, 2, 2, 2}, {1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0});
    ad::Value y = ad::global_avg_pool(ad::constant(x));
    CHECK(y.val().at(0, 0) == doctest::Approx(2.5));
    CHECK(y.val().at(0, 1) == doctest::Approx(25.0));
}

TEST_CASE("slice_cols picks a contiguous column range") {
    Tensor x({2, 4}, {0, 1, 2, 3, 10, 11, 12, 13});
    ad::Value y = ad::slice_cols(ad::constant(x), 1, 2);
    REQUIRE(y.val().dim(1) == 2);
    CHECK(y.val().at(0, 0) == 1.0);
    CHECK(y.val().at(1, 1) == 12.0);
    CHECK_THROWS_AS(ad::slice_cols(ad::constant(x), 3, 2), ShapeError);
}

// -------------------------------------------------------------- grad checks

TEST_CASE("gradients: elementwise ops") {
    Rng rng(310);
    auto x = rand_off_zero(rng, {2, 3});
    auto y = rand_off_zero(rng, {2, 3});

    CHECK(grad_check([](const std::vector<ad::Value>& v) { return ad::mean_all(ad::add(v[0], v[1])); },
                     {x, y}) < kGradTol);
    CHECK(grad_check([](const std::vector<ad::Value>& v) { return ad::mean_all(ad::sub(v[0], v[1])); },
                     {x, y}) < kGradTol);
    CHECK(grad_check([](const std::vector<ad::Value>& v) { return ad::mean_all(ad::mul(v[0], v[1])); },
                     {x, y}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_all(ad::add_scalar(ad::mul(v[0], v[0]), 1.5)); },
              {x}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_all(ad::mul_scalar(ad::mul(v[0], v[0]), -2.5)); },
              {x}) < kGradTol);
}

TEST_CASE("gradients: activations") {
    Rng rng(311);
    auto x = rand_off_zero(rng, {2, 2, 3, 3});
    CHECK(grad_check([](const std::vector<ad::Value>& v) { return ad::mean_all(ad::relu(v[0])); },
                     {x}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_all(ad::leaky_relu(v[0], 0.2)); },
              {x}) < kGradTol);
    CHECK(grad_check([](const std::vector<ad::Value>& v) { return ad::mean_all(ad::tanh_act(v[0])); },
                     {x}) < kGradTol);
}

TEST_CASE("gradients: reductions and losses") {
    Rng rng(312);
    auto a = rand_off_zero(rng, {3, 4});
    auto b = rand_off_zero(rng, {3, 4});

    // mean_all has an exactly known gradient.
    ad::Value xa = ad::leaf(a);
    ad::Value m = ad::mean_all(xa);
    ad::backward(m);
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(xa.grad()[i] == doctest::Approx(1.0 / 12.0));

    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_abs_diff(v[0], v[1]); },
              {a, b}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_sq_vs(v[0], 1.0); },
              {a}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_sq_vs(v[0], 0.0); },
              {a}) < kGradTol);
}

TEST_CASE("wsum gradients are exactly the weights") {
    ad::Value a = ad::leaf(Tensor::scalar(2.0));
    ad::Value b = ad::leaf(Tensor::scalar(-3.0));
    ad::Value c = ad::leaf(Tensor::scalar(0.5));
    ad::Value s = ad::wsum({a, b, c}, {10.0, 1.0, 0.25});
    CHECK(s.val()[0] == doctest::Approx(10.0 * 2.0 - 3.0 + 0.25 * 0.5));
    ad::backward(s);
    CHECK(a.grad()[0] == 10.0);
    CHECK(b.grad()[0] == 1.0);
    CHECK(c.grad()[0] == 0.25);
}

TEST_CASE("gradients: slice_cols") {
    Rng rng(313);
    auto x = rand_off_zero(rng, {3, 6});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) { return ad::mean_all(ad::slice_cols(v[0], 2, 3)); },
              {x}) < kGradTol);
}

TEST_CASE("gradients: conv2d over the kernel zoo") {
    Rng rng(314);
    struct Cfg {
        int64_t k, s, p;
    };
    for (Cfg c : {Cfg{3, 1, 1}, Cfg{4, 2, 1}, Cfg{7, 1, 3}, Cfg{1, 1, 0}, Cfg{5, 1, 2}}) {
        auto x = rand_normal(rng, {2, 3, 5, 6});
        auto w = rand_normal(rng, {4, 3, c.k, c.k});
        auto b = rand_normal(rng, {4});
        const int64_t s = c.s, p = c.p;
        CHECK(grad_check(
                  [s, p](const std::vector<ad::Value>& v) {
                      return ad::mean_all(ad::conv2d(v[0], v[1], v[2], s, p));
                  },
                  {x, w, b}) < kGradTol);
    }
}

TEST_CASE("gradients: conv2d through a nonlinearity") {
    // Composition stresses the col buffer reuse in the backward pass.
    Rng rng(315);
    auto x = rand_normal(rng, {1, 2, 6, 6});
    auto w = rand_normal(rng, {3, 2, 3, 3});
    auto b = rand_normal(rng, {3});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::tanh_act(ad::conv2d(v[0], v[1], v[2], 1, 1)), 0.3);
              },
              {x, w, b}) < kGradTol);
}

TEST_CASE("gradients: linear") {
    Rng rng(316);
    auto x = rand_normal(rng, {3, 5});
    auto w = rand_normal(rng, {4, 5});
    auto b = rand_normal(rng, {4});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_all(ad::linear(v[0], v[1], v[2]));
              },
              {x, w, b}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::linear(v[0], v[1], v[2]), 0.5);
              },
              {x, w, b}) < kGradTol);
}

TEST_CASE("gradients: normalizations") {
    Rng rng(317);
    auto x = rand_normal(rng, {2, 3, 4, 4});
    x.scale(1.7);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::instance_norm(v[0]), 0.25);
              },
              {x}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::layer_norm_chw(v[0]), 0.25);
              },
              {x}) < kGradTol);
}

TEST_CASE("gradients: channel and sample affines") {
    Rng rng(318);
    auto x = rand_normal(rng, {2, 3, 4, 4});
    auto g = rand_off_zero(rng, {3});
    auto t = rand_normal(rng, {3});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::channel_affine(v[0], v[1], v[2]), 0.1);
              },
              {x, g, t}) < kGradTol);

    auto gs = rand_off_zero(rng, {2, 3});
    auto ts = rand_normal(rng, {2, 3});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::sample_affine(v[0], v[1], v[2]), 0.1);
              },
              {x, gs, ts}) < kGradTol);
}

TEST_CASE("gradients: upsample and pooling") {
    Rng rng(319);
    auto x = rand_normal(rng, {2, 3, 3, 4});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::upsample_nearest2(v[0]), 0.2);
              },
              {x}) < kGradTol);
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(ad::global_avg_pool(v[0]), 0.2);
              },
              {x}) < kGradTol);
}

TEST_CASE("gradients: adain style normalization assembly") {
    // instance_norm followed by a per-sample affine, the generator's core.
    Rng rng(320);
    auto x = rand_normal(rng, {2, 3, 4, 4});
    auto g = rand_off_zero(rng, {2, 3});
    auto t = rand_normal(rng, {2, 3});
    CHECK(grad_check(
              [](const std::vector<ad::Value>& v) {
                  return ad::mean_sq_vs(
                      ad::sample_affine(ad::instance_norm(v[0]), v[1], v[2]), 0.3);
              },
              {x, g, t}) < kGradTol);
}

// ---------------------------------------------------------- graph mechanics

TEST_CASE("a value used twice accumulates both paths") {
    ad::Value x = ad::leaf(Tensor::scalar(3.0));
    // y = x*x + x  =>  dy/dx = 2x + 1 = 7
    ad::Value y = ad::add(ad::mul(x, x), x);
    ad::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("backward twice does not double count") {
    ad::Value x = ad::leaf(Tensor::scalar(2.0));
    ad::Value y = ad::mul(x, x);
    ad::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    ad::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("detach cuts the history") {
    ad::Value x = ad::leaf(Tensor::scalar(2.0));
    ad::Value d = ad::detach(ad::mul(x, x));
    CHECK_FALSE(d.requires_grad());
    ad::Value y = ad::mul(d, ad::mul(x, x));  // y = 4 * x^2 with d constant
    ad::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(16.0));
}

TEST_CASE("ops over constants build no history") {
    ad::Value a = ad::constant(Tensor::scalar(1.0));
    ad::Value b = ad::constant(Tensor::scalar(2.0));
    ad::Value c = ad::mul(ad::add(a, b), b);
    CHECK_FALSE(c.requires_grad());
    CHECK(c.node()->parents.empty());
}

TEST_CASE("leaves without grad do not receive gradients") {
    ad::Value x = ad::leaf(Tensor::scalar(3.0));
    ad::Value f = ad::leaf(Tensor::scalar(5.0), /*requires_grad=*/false);
    ad::Value y = ad::mul(x, f);
    ad::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(5.0));
    CHECK(f.grad().numel() == 0);  // untouched
}

TEST_CASE("backward rejects bad roots") {
    ad::Value x = ad::leaf(Tensor({2, 2}, 1.0));
    ad::Value y = ad::mul(x, x);
    CHECK_THROWS_AS(ad::backward(y), ShapeError);
    ad::Value c = ad::constant(Tensor::scalar(1.0));
    CHECK_THROWS_AS(ad::backward(c), dsmap::Error);
}

TEST_CASE("shape mismatches are rejected") {
    ad::Value a = ad::constant(Tensor({2, 3}, 1.0));
    ad::Value b = ad::constant(Tensor({3, 2}, 1.0));
    CHECK_THROWS_AS(ad::add(a, b), ShapeError);
    CHECK_THROWS_AS(ad::mul(a, b), ShapeError);
    CHECK_THROWS_AS(ad::mean_abs_diff(a, b), ShapeError);
}

TEST_CASE("deep chains do not overflow the stack") {
    // The reverse sweep is iterative; a long chain must be fine. Keep
    // every link alive in a vector and free from the deep end so the
    // shared_ptr teardown is linear too.
    ad::Value x = ad::leaf(Tensor::scalar(1.0));
    std::vector<ad::Value> chain{x};
    for (int i = 0; i < 20000; ++i) chain.push_back(ad::add_scalar(chain.back(), 0.0001));
    ad::backward(chain.back());
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(chain.back().val()[0] == doctest::Approx(3.0));
    while (!chain.empty()) chain.pop_back();
}
