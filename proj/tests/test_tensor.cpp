#include <doctest.h>

#include <cmath>
#include <limits>

#include "dsmap/tensor.hpp"

using dsmap::ShapeError;
using dsmap::Tensor;

TEST_CASE("tensor construction and shape queries") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.ndim() == 4);
    CHECK(t.numel() == 120);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(3) == 5);
    CHECK(t[0] == 0.0);
    CHECK(t[119] == 0.0);

    Tensor f({3}, 2.5);
    CHECK(f[0] == 2.5);
    CHECK(f[2] == 2.5);

    Tensor v({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(v.at(0, 1) == 2.0);
    CHECK(v.at(1, 0) == 3.0);

    Tensor s = Tensor::scalar(7.0);
    CHECK(s.numel() == 1);
    CHECK(s[0] == 7.0);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("four dimensional indexing is row major") {
    Tensor t({2, 3, 4, 5});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i);
    // flat index = ((b*C + c)*H + y)*W + x
    CHECK(t.at(1, 2, 3, 4) == static_cast<double>(((1 * 3 + 2) * 4 + 3) * 5 + 4));
    CHECK(t.at(0, 0, 0, 1) == 1.0);
    CHECK(t.at(0, 1, 0, 0) == 20.0);
}

TEST_CASE("reductions") {
    Tensor t({4}, {1.0, -2.0, 3.0, -4.0});
    CHECK(t.sum() == doctest::Approx(-2.0));
    CHECK(t.mean() == doctest::Approx(-0.5));
    CHECK(t.min() == -4.0);
    CHECK(t.max() == 3.0);
    CHECK(t.abs_max() == 4.0);
}

TEST_CASE("all_finite flags nan and inf") {
    Tensor t({3}, {1.0, 2.0, 3.0});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("axpy fill scale") {
    Tensor a({3}, {1.0, 2.0, 3.0});
    Tensor b({3}, {10.0, 20.0, 30.0});
    a.axpy(0.5, b);
    CHECK(a[0] == doctest::Approx(6.0));
    CHECK(a[2] == doctest::Approx(18.0));

    a.scale(2.0);
    CHECK(a[1] == doctest::Approx(24.0));

    a.fill(-1.0);
    CHECK(a[0] == -1.0);
    CHECK(a[2] == -1.0);

    Tensor c({4});
    CHECK_THROWS_AS(a.axpy(1.0, c), ShapeError);
}

TEST_CASE("reshaped preserves data and rejects bad sizes") {
    Tensor t({2, 6});
    for (int64_t i = 0; i < 12; ++i) t[i] = static_cast<double>(i);
    Tensor r = t.reshaped({3, 4});
    CHECK(r.ndim() == 2);
    CHECK(r.dim(0) == 3);
    CHECK(r.at(2, 3) == 11.0);
    CHECK_THROWS_AS(t.reshaped({5, 2}), ShapeError);
}

TEST_CASE("shape helpers") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    Tensor c({3, 2});
    CHECK(a.same_shape(b));
    CHECK_FALSE(a.same_shape(c));
    CHECK_NOTHROW(dsmap::check_same_shape(a, b, "t"));
    CHECK_THROWS_AS(dsmap::check_same_shape(a, c, "t"), ShapeError);
    CHECK(a.shape_str() == "[2x3]");
}
