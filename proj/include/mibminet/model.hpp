#pragma once

#include "mibminet/nn_ops.hpp"
#include "mibminet/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mibminet {

/// One network instance: (channels, samples, filters, temporal kernel,
/// classes) plus the fixed pooling and separable-kernel sizes.
struct ModelConfig {
    int n_ch = 0;
    int n_s = 0;
    int n_k = 0;
    int n_f = 0;
    int n_cl = 0;
    int pool = 8;
    int sep_kernel = 16;

    void validate() const;

    int len_after_pool1() const { return n_s / pool; }
    int len_after_pool2() const { return len_after_pool1() / pool; }
    int fc_inputs() const { return n_k * len_after_pool2(); }

    bool operator==(const ModelConfig&) const = default;
};

/// Float parameter set, block order:
///   phi1: spatial conv + BN
///   phi2: temporal depthwise conv + BN + ReLU + pool
///   phi3: separable conv (depthwise + pointwise) + BN + ReLU + pool
///   phi4: flatten + fully connected
struct Network {
    ModelConfig config;
    SpatialConvParams<float> spatial;
    BatchNormParams<float> bn1;
    TemporalConvParams<float> temporal;
    BatchNormParams<float> bn2;
    TemporalConvParams<float> sep_depthwise;
    PointwiseConvParams<float> pointwise;
    BatchNormParams<float> bn3;
    FcParams<float> fc;

    int64_t parameter_count() const;
};

Network build(const ModelConfig& config, uint64_t init_seed);

// Points where activations are carried as int8 in the deployed network: the
// input and every block output the integer engine materializes.
enum QuantPoint : int {
    kQuantInput = 0,
    kQuantPhi1 = 1,
    kQuantPhi2 = 2,
    kQuantPhi3Depthwise = 3,
    kQuantPhi3 = 4,
};
inline constexpr int kNumQuantPoints = 5;

/// Activation fake-quant state for quantization-aware training. Tracks the
/// running |activation| maximum per quant point and derives power-of-two
/// scales from it.
struct ActQuant {
    bool enabled = false;
    bool track = true;  // update the running maxima on forward
    std::array<double, kNumQuantPoints> amax{};
    std::array<int, kNumQuantPoints> scale_exp{};
};

struct ForwardStats {
    int64_t maccs = 0;
};

/// Inference forward pass (running batch-norm statistics). Optional
/// activation quantization and MACC instrumentation.
Vec<float> forward(const Network& net, const Mat<float>& x, const ActQuant* aq = nullptr,
                   ForwardStats* stats = nullptr);

struct TrainCache {
    Batch<float> input;
    Batch<float> phi1_conv;
    BatchNormCache<float> bn1;
    Batch<float> phi1_out;  // BN output, fake-quantized when active
    Batch<float> phi2_conv;
    BatchNormCache<float> bn2;
    Batch<float> phi2_bn;
    Batch<float> phi2_pool;  // pooled + fake-quantized
    Batch<float> phi3_dw;    // depthwise output, fake-quantized when active
    Batch<float> phi3_pw;
    BatchNormCache<float> bn3;
    Batch<float> phi3_bn;
    Batch<float> phi3_pool;  // pooled + fake-quantized, flattens into the head
};

/// Training forward over a batch (batch statistics, running stats updated).
/// Quantize-dequantize nodes are inserted at the quant points when `aq` is
/// active; their gradient is treated as identity (straight-through).
/// Per-trial work is spread over `workers` threads; reductions stay in trial
/// order, so the result does not depend on the worker count.
std::vector<Vec<float>> forward_train(Network& net, const Batch<float>& xs, ActQuant* aq,
                                      TrainCache& cache, float bn_momentum = 0.1f,
                                      int workers = 1);

struct NetworkGrads {
    Mat<float> spatial_w, temporal_w, sep_dw_w, pointwise_w, fc_w;
    Vec<float> fc_b;
    Vec<float> bn1_gamma, bn1_beta, bn2_gamma, bn2_beta, bn3_gamma, bn3_beta;

    static NetworkGrads zero(const ModelConfig& config);
};

NetworkGrads backward_train(const Network& net, const TrainCache& cache,
                            const std::vector<Vec<float>>& dlogits, int workers = 1);

/// Visits every trainable parameter tensor as a flat span, paired with its
/// gradient. `is_weight` marks the tensors subject to progressive weight
/// quantization (conv and FC weights; batch-norm and bias are excluded).
template <class F>
void for_each_param(Network& net, NetworkGrads& g, F&& f) {
    auto mat = [&](const char* name, Mat<float>& w, Mat<float>& gw, bool is_weight) {
        f(name, w.data(), gw.data(), static_cast<size_t>(w.size()), is_weight);
    };
    auto vec = [&](const char* name, Vec<float>& w, Vec<float>& gw) {
        f(name, w.data(), gw.data(), static_cast<size_t>(w.size()), false);
    };
    mat("spatial.w", net.spatial.weights, g.spatial_w, true);
    vec("bn1.gamma", net.bn1.gamma, g.bn1_gamma);
    vec("bn1.beta", net.bn1.beta, g.bn1_beta);
    mat("temporal.w", net.temporal.weights, g.temporal_w, true);
    vec("bn2.gamma", net.bn2.gamma, g.bn2_gamma);
    vec("bn2.beta", net.bn2.beta, g.bn2_beta);
    mat("sep_dw.w", net.sep_depthwise.weights, g.sep_dw_w, true);
    mat("pointwise.w", net.pointwise.weights, g.pointwise_w, true);
    vec("bn3.gamma", net.bn3.gamma, g.bn3_gamma);
    vec("bn3.beta", net.bn3.beta, g.bn3_beta);
    mat("fc.w", net.fc.weights, g.fc_w, true);
    vec("fc.b", net.fc.bias, g.fc_b);
}

// ---------------------------------------------------------------------------
// Execution plan: the ordered layer steps with feature, parameter and MACC
// counts. The biggest consecutive (input + output) pair dictates the feature
// memory under the layer-by-layer schedule.

struct LayerStep {
    std::string name;
    int64_t in_features = 0;
    int64_t out_features = 0;
    int64_t params = 0;
    int64_t maccs = 0;
};

struct LayerPlan {
    std::vector<LayerStep> steps;

    int64_t peak_feature_pair() const;
    int64_t params_total() const;
    int64_t macc_total() const;
};

LayerPlan layer_plan(const ModelConfig& config);
inline LayerPlan layer_plan(const Network& net) { return layer_plan(net.config); }

}  // namespace mibminet
