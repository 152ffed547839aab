#pragma once

#include "mibminet/quantizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mibminet {

/// Round-half-away-from-zero arithmetic right shift on a 64-bit value.
inline int64_t rshift_round(int64_t v, int shift) {
    if (shift == 0) return v;
    const int64_t add = int64_t(1) << (shift - 1);
    return v >= 0 ? (v + add) >> shift : -((-v + add) >> shift);
}

/// Accumulator back to int8: clamp(rshift_round((acc + bias) * mult, shift)).
inline int8_t requantize(int32_t acc, const RequantConstants& c) {
    const int64_t v = (int64_t(acc) + c.bias) * c.mult;
    const int64_t r = rshift_round(v, c.shift);
    return static_cast<int8_t>(std::clamp<int64_t>(r, -128, 127));
}

struct LayerTrace {
    std::string name;
    int64_t maccs = 0;
    int64_t input_bytes = 0;
    int64_t output_bytes = 0;
    int64_t live_peak_bytes = 0;  // input_bytes + output_bytes under the two-buffer schedule
};

struct ExecutionTrace {
    std::vector<LayerTrace> layers;
    int64_t macc_total = 0;
    int64_t weight_bytes = 0;     // parameter count at one byte per value
    int64_t peak_live_bytes = 0;  // max over layers of (input + output)
    int64_t requant_saturations = 0;

    int64_t peak_memory_bytes() const { return weight_bytes + peak_live_bytes; }

    std::string text() const;
    std::string kv() const;
};

/// Shape-chain and overflow validation. Every stage must satisfy
///   (127 * 127 * dot_len * pool + |bias|) <= INT32_MAX
/// and the 64-bit requantization product bound; loading rejects otherwise.
void validate(const QuantNetwork& qnet);

struct EngineResult {
    Vec<int32_t> logits;
    ExecutionTrace trace;
};

/// Layer-by-layer integer inference with two ping-pong activation buffers.
/// int8 x int8 products accumulate in 32 bits; results are exact integers,
/// independent of execution order.
EngineResult run(const QuantNetwork& qnet, const QuantTensor& x);

struct SimdModel {
    int lanes = 4;
    int cores = 1;
    double overhead_factor = 1.0;
};

/// ceil(macc_total / (lanes * cores)) * overhead_factor, rounded up.
/// A reporting convenience only; it models nothing beyond SIMD width.
int64_t project_cycles(const ExecutionTrace& trace, const SimdModel& model);

}  // namespace mibminet
