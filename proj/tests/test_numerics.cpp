#include "mibminet/numerics.hpp"

#include <doctest.h>

using namespace mibminet;

TEST_CASE("reshape preserves row-major data order") {
    TensorF t({2, 3}, {1, 2, 3, 4, 5, 6});
    TensorF flat = reshape(t, {6});
    CHECK(flat.shape() == std::vector<Eigen::Index>{6});
    CHECK(flat.data() == std::vector<float>{1, 2, 3, 4, 5, 6});

    TensorF one({1}, {42.0f});
    TensorF expanded = reshape(one, {1, 1, 1});
    CHECK(expanded.shape().size() == 3);
    CHECK(expanded.data()[0] == 42.0f);

    // flattening the BCI input block for FC accounting
    TensorF big({22, 750}, std::vector<float>(22 * 750, 0.0f));
    CHECK(reshape(big, {16500}).size() == 16500);

    CHECK_THROWS_AS(reshape(t, {4}), ShapeError);
}

TEST_CASE("reshape round trip is the identity on data") {
    Rng rng(11);
    std::vector<float> data(24);
    for (auto& v : data) v = float(rng.uniform(-2, 2));
    TensorF t({4, 6}, data);
    TensorF back = reshape(reshape(t, {2, 12}), {4, 6});
    CHECK(back.data() == data);
}

TEST_CASE("scalar quantization rounds half away from zero and clamps") {
    // round(v * 127) on [0.5, -1.0, 0.25]
    CHECK(quantize_value(0.5, 127.0).first == 64);
    CHECK(quantize_value(-1.0, 127.0).first == -127);
    CHECK(quantize_value(0.25, 127.0).first == 32);
    CHECK(quantize_value(-0.5, 127.0).first == -64);  // -63.5 -> -64

    auto [v, sat] = quantize_value(2.0, 127.0);
    CHECK(v == 127);
    CHECK(sat);
}

TEST_CASE("tensor quantization on power-of-two grids") {
    TensorF zeros({3}, {0, 0, 0});
    QuantizeResult r = quantize(zeros, 5);
    CHECK(r.tensor.data == std::vector<int8_t>{0, 0, 0});
    CHECK(r.saturated == 0);

    TensorF t({3}, {0.5f, -1.0f, 0.25f});
    QuantizeResult q = quantize(t, 6);  // multiplier 64
    CHECK(q.tensor.data == std::vector<int8_t>{32, -64, 16});

    TensorD back = dequantize<double>(q.tensor);
    for (size_t i = 0; i < 3; ++i)
        CHECK(std::abs(back.data()[i] - t.data()[i]) <= std::ldexp(1.0, -7));
}

TEST_CASE("round-trip bound holds across random values") {
    Rng rng(3);
    for (int n : {-2, 0, 3, 7}) {
        const double bound = std::ldexp(1.0, -n - 1);
        const double limit = 127.0 * std::ldexp(1.0, -n);
        for (int i = 0; i < 2000; ++i) {
            const double v = rng.uniform(-limit, limit);
            auto [q, sat] = quantize_value(v, std::ldexp(1.0, n));
            CHECK(!sat);
            CHECK(std::abs(v - dequantize_value(q, n)) <= bound);
        }
    }
}

TEST_CASE("quantize is monotone non-decreasing") {
    Rng rng(17);
    for (int i = 0; i < 5000; ++i) {
        double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
        if (a > b) std::swap(a, b);
        const int n = int(rng.below(9)) - 2;
        CHECK(quantize_value(a, std::ldexp(1.0, n)).first <=
              quantize_value(b, std::ldexp(1.0, n)).first);
    }
}

TEST_CASE("scale exponent selection") {
    CHECK(choose_scale_exp(1.0) == 6);
    CHECK(choose_scale_exp(127.0) == 0);
    CHECK(choose_scale_exp(0.0) == 0);
    CHECK(choose_scale_exp(63.5) == 1);
    // clamped at both ends
    CHECK(choose_scale_exp(1e12) == -24);
    CHECK(choose_scale_exp(1e-12) == 24);
    // the selected scale never saturates the max element
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double m = std::exp(rng.uniform(-8, 8));
        const int n = choose_scale_exp(m);
        if (n > -24 && n < 24) CHECK(m * std::ldexp(1.0, n) <= 127.0);
    }
}

TEST_CASE("tensor shape/data consistency is enforced") {
    CHECK_THROWS_AS(TensorF({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(TensorF({-1}, {}), ShapeError);
}
