#pragma once

#include "mibminet/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mibminet {

// Weights use the symmetric range [-127, 127]; -128 is never produced so
// accumulator negation stays safe. Activations may reach -128 after clamping.
inline constexpr int kQuantMin = -127;
inline constexpr int kQuantMax = 127;
inline constexpr int kActMin = -128;

/// Round half away from zero. The one rounding rule used wherever int8 values
/// are produced, so the integer engine is bit-reproducible.
inline int64_t round_half_away(double v) {
    return static_cast<int64_t>(v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

struct QuantizeResult {
    QuantTensor tensor;
    int64_t saturated = 0;  // elements clamped to the int8 range
};

/// Quantize with an arbitrary positive multiplier. The engine always passes a
/// power of two; the general form keeps the scalar rounding rule testable on
/// its own.
inline std::pair<int8_t, bool> quantize_value(double v, double multiplier) {
    int64_t q = round_half_away(v * multiplier);
    bool sat = q < kQuantMin || q > kQuantMax;
    q = std::clamp<int64_t>(q, kQuantMin, kQuantMax);
    return {static_cast<int8_t>(q), sat};
}

template <class Scalar>
QuantizeResult quantize(const Tensor<Scalar>& t, int scale_exp) {
    QuantizeResult out;
    out.tensor.shape = t.shape();
    out.tensor.scale_exp = scale_exp;
    out.tensor.data.resize(t.data().size());
    const double mult = std::ldexp(1.0, scale_exp);
    for (size_t i = 0; i < t.data().size(); ++i) {
        auto [q, sat] = quantize_value(static_cast<double>(t.data()[i]), mult);
        out.tensor.data[i] = q;
        out.saturated += sat;
    }
    return out;
}

template <class Scalar>
QuantizeResult quantize(const Mat<Scalar>& m, int scale_exp) {
    return quantize(Tensor<Scalar>(m), scale_exp);
}

inline double dequantize_value(int8_t q, int scale_exp) {
    return std::ldexp(static_cast<double>(q), -scale_exp);
}

template <class Scalar = float>
Tensor<Scalar> dequantize(const QuantTensor& q) {
    std::vector<Scalar> data(q.data.size());
    for (size_t i = 0; i < q.data.size(); ++i)
        data[i] = static_cast<Scalar>(dequantize_value(q.data[i], q.scale_exp));
    return Tensor<Scalar>(q.shape, std::move(data));
}

/// Quantize-dequantize through the int8 grid; the fake-quant node used during
/// quantization-aware training.
template <class Scalar>
Scalar fake_quant_value(Scalar v, int scale_exp) {
    auto [q, sat] = quantize_value(static_cast<double>(v), std::ldexp(1.0, scale_exp));
    (void)sat;
    return static_cast<Scalar>(dequantize_value(q, scale_exp));
}

/// Largest n with max_abs * 2^n <= 127, clamped to [-24, 24]; 0 when the
/// tensor is all zero.
inline int choose_scale_exp(double max_abs) {
    if (!(max_abs > 0.0)) return 0;
    int n = static_cast<int>(std::floor(std::log2(127.0 / max_abs)));
    while (max_abs * std::ldexp(1.0, n) > 127.0) --n;
    while (max_abs * std::ldexp(1.0, n + 1) <= 127.0) ++n;
    return std::clamp(n, -24, 24);
}

template <class Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& t, std::vector<Eigen::Index> new_shape) {
    if (Tensor<Scalar>::element_count(new_shape) != t.size())
        throw ShapeError("reshape: element count mismatch");
    return Tensor<Scalar>(std::move(new_shape), t.data());
}

template <class Scalar>
bool all_finite(const Mat<Scalar>& m) {
    return m.allFinite();
}

template <class Scalar>
bool all_finite(const Tensor<Scalar>& t) {
    for (Scalar v : t.data())
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

}  // namespace mibminet
