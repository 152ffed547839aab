#pragma once

#include "mibminet/dataset.hpp"
#include "mibminet/model.hpp"
#include "mibminet/numerics.hpp"

#include <cstdint>
#include <vector>

namespace mibminet {

/// Integer requantization constants. Applying them computes
///   clamp(rshift_round((acc + bias) * mult, shift), -128, 127)
/// with a 64-bit intermediate and round-half-away-from-zero on the shift.
struct RequantConstants {
    int32_t mult = 1;
    int32_t shift = 0;
    int32_t bias = 0;

    bool operator==(const RequantConstants&) const = default;
};

/// Scale selection: largest n with max|t| * 2^n <= 127.
template <class Scalar>
int choose_scale_exp(const Tensor<Scalar>& t) {
    double amax = 0.0;
    for (Scalar v : t.data()) amax = std::max(amax, std::abs(double(v)));
    return choose_scale_exp(amax);
}

template <class Scalar>
int choose_scale_exp(const Mat<Scalar>& m) {
    return choose_scale_exp(m.size() ? double(m.cwiseAbs().maxCoeff()) : 0.0);
}

/// Folds inference-form batch norm and the quantization conversion factors
/// into per-feature requantization constants on the conv accumulator.
/// Rejects non-positive batch-norm scales: the deployed ReLU clamp is only
/// valid when the folded affine map preserves sign.
std::vector<RequantConstants> fold_bn(int weight_scale_exp, const BatchNormParams<float>& bn,
                                      int in_scale_exp, int out_scale_exp);

/// Pure scale-conversion constants (identity affine), one per feature.
std::vector<RequantConstants> fold_rescale(int features, int weight_scale_exp, int in_scale_exp,
                                           int out_scale_exp);

/// Mean pooling over `pool` int8 values as an integer sum followed by one
/// multiply-shift requantization; pool must be a power of two so the divide
/// is a rounded shift.
RequantConstants pool_requant(int pool);

// ---------------------------------------------------------------------------

enum class StageKind : uint8_t {
    kSpatialConv = 0,
    kTemporalConv = 1,   // depthwise; weights stored reversed
    kPointwiseConv = 2,
    kFullyConnected = 3  // logits stay in the 32-bit accumulator domain
};

/// One integer stage: conv accumulation, per-feature requantization to int8,
/// optional clamp-at-zero ReLU, then optional mean pooling in the int8
/// domain (window sum plus a shift-only requantization).
struct QuantStage {
    StageKind kind = StageKind::kSpatialConv;
    QuantTensor weights;
    std::vector<RequantConstants> requant;  // per output feature; empty for FC
    std::vector<int32_t> bias;              // FC accumulator-domain bias
    bool relu = false;
    int32_t pool = 1;  // power of two; int8 window sum divided by shift
    int32_t in_scale_exp = 0;
    int32_t out_scale_exp = 0;
};

struct QuantNetwork {
    ModelConfig config;
    int32_t input_scale_exp = 0;
    int32_t logit_scale_exp = 0;  // dequantize logits with 2^(-logit_scale_exp)
    std::vector<QuantStage> stages;
};

/// Post-training export. Weight scales come from each tensor's |max|;
/// activation scales from the given |activation| percentile over the
/// calibration set at every int8 materialization point. Temporal kernels are
/// stored reversed for cross-correlation execution.
QuantNetwork export_quantized(const Network& net, const TrialDataset& calib,
                              double percentile = 0.999);

/// Quantizes one trial with the network's input scale; returns the int8
/// input and the number of saturated samples.
std::pair<QuantTensor, int64_t> quantize_input(const QuantNetwork& qnet, const Mat<float>& x);

}  // namespace mibminet
