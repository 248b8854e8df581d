#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dsmap/nn.hpp"

namespace ad = dsmap::ad;
using dsmap::Rng;
using dsmap::Tensor;
namespace nn = dsmap::nn;

TEST_CASE("param store registers unique names in order") {
    nn::ParamStore ps;
    ps.add("a.conv.0.weight", Tensor({2, 2}));
    ps.add("a.conv.0.bias", Tensor({2}));
    ps.add("b.fc.0.weight", Tensor({3, 3}));
    CHECK(ps.entries().size() == 3);
    CHECK(ps.entries()[0].name == "a.conv.0.weight");
    CHECK(ps.entries()[2].name == "b.fc.0.weight");
    CHECK(ps.total_size() == 4 + 2 + 9);
    CHECK(ps.contains("a.conv.0.bias"));
    CHECK_FALSE(ps.contains("a.conv.1.bias"));
    CHECK_THROWS_AS(ps.add("a.conv.0.weight", Tensor({1})), dsmap::Error);
    CHECK_THROWS_AS(ps.find("nope"), dsmap::Error);
    CHECK(ps.find("b.fc.0.weight").val().numel() == 9);
}

TEST_CASE("component filter matches whole dotted segments") {
    nn::ParamStore ps;
    ps.add("gen_A.conv.0.weight", Tensor({1}));
    ps.add("gen_A.conv.0.bias", Tensor({1}));
    ps.add("gen_AB.conv.0.weight", Tensor({1}));  // must not match "gen_A"
    auto sub = ps.component("gen_A");
    CHECK(sub.size() == 2);
    for (const auto& e : sub) CHECK(e.name.rfind("gen_A.", 0) == 0);
}

TEST_CASE("requires_grad toggling and the inference guard") {
    nn::ParamStore ps;
    ad::Value w = ps.add("x.conv.0.weight", Tensor({2}, 1.0));
    CHECK(w.requires_grad());
    {
        nn::InferenceGuard guard(ps);
        CHECK_FALSE(w.requires_grad());
        ad::Value y = ad::mul(w, w);
        CHECK_FALSE(y.requires_grad());  // graph not built in inference mode
    }
    CHECK(w.requires_grad());
    ps.set_requires_grad(false);
    CHECK_FALSE(w.requires_grad());
    ps.set_requires_grad(true);
    CHECK(w.requires_grad());
}

TEST_CASE("conv layer init statistics and shapes") {
    nn::ParamStore ps;
    Rng rng(77);
    nn::Conv2d conv(ps, "c.conv.0", 8, 16, 3, 1, 1, rng);
    CHECK(conv.w.val().shape() == std::vector<int64_t>{16, 8, 3, 3});
    CHECK(conv.b.val().shape() == std::vector<int64_t>{16});
    // Bias starts at zero, weights near zero with std 0.02.
    CHECK(conv.b.val().abs_max() == 0.0);
    const Tensor& w = conv.w.val();
    double s1 = 0.0, s2 = 0.0;
    for (int64_t i = 0; i < w.numel(); ++i) {
        s1 += w[i];
        s2 += w[i] * w[i];
    }
    const double mean = s1 / w.numel();
    const double sd = std::sqrt(s2 / w.numel() - mean * mean);
    CHECK(std::abs(mean) < 0.002);
    CHECK(sd == doctest::Approx(0.02).epsilon(0.1));

    ad::Value x = ad::constant(Tensor({2, 8, 5, 5}, 0.5));
    CHECK(conv(x).val().shape() == std::vector<int64_t>{2, 16, 5, 5});
}

TEST_CASE("layer norm layer starts as the identity affine") {
    nn::ParamStore ps;
    nn::LayerNormChw ln(ps, "g.norm.0", 4);
    CHECK(ln.gamma.val()[0] == 1.0);
    CHECK(ln.beta.val()[3] == 0.0);
    Rng rng(5);
    Tensor x({2, 4, 3, 3});
    rng.fill_normal(x, 0.0, 2.0);
    ad::Value y = ln(ad::constant(x));
    // With gamma=1, beta=0 this is plain normalization: zero mean per sample.
    for (int64_t b = 0; b < 2; ++b) {
        double acc = 0.0;
        for (int64_t c = 0; c < 4; ++c)
            for (int64_t i = 0; i < 3; ++i)
                for (int64_t j = 0; j < 3; ++j) acc += y.val().at(b, c, i, j);
        CHECK(acc / 36.0 == doctest::Approx(0.0).epsilon(1e-10));
    }
}

TEST_CASE("res block is near identity at init and shape preserving") {
    nn::ParamStore ps;
    Rng rng(9);
    nn::ResBlock blk(ps, "r.conv.0", "r.conv.1", 6, rng);
    Rng data(10);
    Tensor x({2, 6, 4, 4});
    data.fill_normal(x);
    ad::Value y = blk(ad::constant(x));
    CHECK(y.val().same_shape(x));
    // Small-weight convs + norm keep the residual branch bounded; the
    // output must stay within a few units of the input.
    double worst = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) worst = std::max(worst, std::abs(y.val()[i] - x[i]));
    CHECK(worst < 5.0);
}

TEST_CASE("gradients flow through composed layers") {
    nn::ParamStore ps;
    Rng rng(21);
    nn::Conv2d conv(ps, "n.conv.0", 2, 3, 3, 1, 1, rng);
    nn::LayerNormChw ln(ps, "n.norm.0", 3);
    nn::Linear fc(ps, "n.fc.0", 3, 2, rng);

    Rng data(22);
    Tensor x({2, 2, 4, 4});
    data.fill_normal(x);
    ad::Value y = fc(ad::global_avg_pool(ad::relu(ln(conv(ad::constant(x))))));
    ad::Value loss = ad::mean_sq_vs(y, 0.7);
    ad::backward(loss);
    // Every parameter must have received a gradient tensor of its shape.
    for (const auto& e : ps.entries()) {
        CHECK(e.value.grad().same_shape(e.value.val()));
        CHECK(e.value.grad().all_finite());
    }
    // The conv weight gradient cannot be all zero for generic data.
    CHECK(conv.w.grad().abs_max() > 0.0);
}

TEST_CASE("adain res block responds to its style inputs") {
    nn::ParamStore ps;
    Rng rng(31);
    nn::AdainResBlock blk(ps, "g.conv.0", "g.conv.1", 4, rng);
    Rng data(32);
    Tensor x({1, 4, 4, 4});
    data.fill_normal(x);

    Tensor zero({1, 4});
    Tensor shift({1, 4}, 0.5);
    ad::Value xz = ad::constant(x);
    ad::Value y0 = blk(xz, ad::constant(zero), ad::constant(zero), ad::constant(zero),
                       ad::constant(zero));
    ad::Value y1 = blk(xz, ad::constant(zero), ad::constant(shift), ad::constant(zero),
                       ad::constant(zero));
    CHECK(y0.val().same_shape(x));
    // A style shift must move the output.
    double diff = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i)
        diff = std::max(diff, std::abs(y1.val()[i] - y0.val()[i]));
    CHECK(diff > 1e-4);
}

TEST_CASE("mlp stacks three linear layers") {
    nn::ParamStore ps;
    Rng rng(41);
    nn::Mlp mlp(ps, "m", 3, 8, 5, rng);
    CHECK(ps.contains("m.fc.0.weight"));
    CHECK(ps.contains("m.fc.1.weight"));
    CHECK(ps.contains("m.fc.2.bias"));
    ad::Value y = mlp(ad::constant(Tensor({2, 3}, 0.4)));
    CHECK(y.val().shape() == std::vector<int64_t>{2, 5});
    CHECK(y.val().all_finite());
}
