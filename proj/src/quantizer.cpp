#include "mibminet/quantizer.hpp"

#include "mibminet/engine.hpp"

#include <algorithm>
#include <cmath>

namespace mibminet {

namespace {

/// Best (mult, shift) with mult <= INT32_MAX approximating the real factor
/// `m`, normalized so trailing factor-of-two precision is moved out of mult.
RequantConstants approximate_multiplier(double m, int64_t bias) {
    if (!(m >= 0.0) || !std::isfinite(m))
        throw ValidationError("fold: requant multiplier must be finite and >= 0");
    if (std::llabs(bias) > INT32_MAX)
        throw ValidationError("fold: requant bias exceeds the 32-bit accumulator domain");
    RequantConstants c;
    c.bias = static_cast<int32_t>(bias);
    int shift = 31;
    int64_t mult = std::llround(std::ldexp(m, shift));
    while (mult > INT32_MAX) {
        if (--shift < 0) throw ValidationError("fold: multiplier too large for mult/shift form");
        mult = std::llround(std::ldexp(m, shift));
    }
    while (shift > 0 && mult != 0 && (mult & 1) == 0) {
        mult >>= 1;
        --shift;
    }
    c.mult = static_cast<int32_t>(mult);
    c.shift = shift;
    return c;
}

}  // namespace

std::vector<RequantConstants> fold_bn(int weight_scale_exp, const BatchNormParams<float>& bn,
                                      int in_scale_exp, int out_scale_exp) {
    const int acc_exp = in_scale_exp + weight_scale_exp;
    std::vector<RequantConstants> out;
    out.reserve(bn.features());
    for (Eigen::Index f = 0; f < bn.features(); ++f) {
        const double a = double(bn.gamma(f)) / std::sqrt(double(bn.running_var(f)) + bn.epsilon);
        if (!(a > 0.0))
            throw ValidationError("fold_bn: non-positive scale at feature " + std::to_string(f) +
                                  "; the ReLU clamp is invalid under a sign flip");
        const double b = double(bn.beta(f)) - a * double(bn.running_mean(f));
        const double m = std::ldexp(a, out_scale_exp - acc_exp);
        const int64_t bias = std::llround((b / a) * std::ldexp(1.0, acc_exp));
        out.push_back(approximate_multiplier(m, bias));
    }
    return out;
}

std::vector<RequantConstants> fold_rescale(int features, int weight_scale_exp, int in_scale_exp,
                                           int out_scale_exp) {
    const double m = std::ldexp(1.0, out_scale_exp - in_scale_exp - weight_scale_exp);
    std::vector<RequantConstants> out(features, approximate_multiplier(m, 0));
    return out;
}

RequantConstants pool_requant(int pool) {
    if (pool < 1 || (pool & (pool - 1)) != 0)
        throw ValidationError("pool_requant: pool must be a positive power of two");
    int shift = 0;
    while ((1 << shift) < pool) ++shift;
    return {1, shift, 0};
}

namespace {

QuantTensor quantize_weights(const MatF& w, bool reverse_rows) {
    MatF stored = w;
    if (reverse_rows) stored = w.rowwise().reverse();
    const int scale = choose_scale_exp(w);
    return quantize(stored, scale).tensor;
}

/// Nearest-rank percentile of |values|.
float abs_percentile(std::vector<float>& values, double p) {
    if (values.empty()) throw ValidationError("calibration produced no activations");
    std::sort(values.begin(), values.end());
    const size_t rank = static_cast<size_t>(std::ceil(p * double(values.size())));
    return values[std::clamp<size_t>(rank, 1, values.size()) - 1];
}

void collect_abs(const MatF& m, std::vector<float>& sink) {
    for (Eigen::Index i = 0; i < m.size(); ++i) sink.push_back(std::fabs(m.data()[i]));
}

}  // namespace

QuantNetwork export_quantized(const Network& net, const TrialDataset& calib, double percentile) {
    const ModelConfig& c = net.config;
    calib.validate();
    if (calib.n_trials() == 0) throw ValidationError("export: calibration set is empty");
    if (calib.n_ch != c.n_ch || calib.n_samples != c.n_s)
        throw ShapeError("export: calibration trials do not match the model config");
    if (!(percentile > 0.0 && percentile <= 1.0))
        throw ValidationError("export: percentile must be in (0, 1]");

    // Activation statistics at every int8 materialization point, from the
    // float network on the calibration set. The phi2/phi3 points sit after
    // ReLU but before the pool: that is where the engine requantizes.
    std::vector<std::vector<float>> abs_at(1 + kNumQuantPoints);
    for (const auto& x : calib.trials) {
        collect_abs(x, abs_at[0]);
        MatF phi1 = batchnorm_forward_infer(spatial_conv_forward(x, net.spatial), net.bn1);
        collect_abs(phi1, abs_at[1 + kQuantPhi1]);
        MatF phi2_relu = relu(
            batchnorm_forward_infer(temporal_depthwise_forward(phi1, net.temporal), net.bn2));
        collect_abs(phi2_relu, abs_at[1 + kQuantPhi2]);
        MatF phi2 = avg_pool(phi2_relu, c.pool);
        MatF dw = temporal_depthwise_forward(phi2, net.sep_depthwise);
        collect_abs(dw, abs_at[1 + kQuantPhi3Depthwise]);
        MatF phi3_relu = relu(
            batchnorm_forward_infer(pointwise_conv_forward(dw, net.pointwise), net.bn3));
        collect_abs(phi3_relu, abs_at[1 + kQuantPhi3]);
    }
    const int n_in = choose_scale_exp(double(abs_percentile(abs_at[0], percentile)));
    const int n1 = choose_scale_exp(double(abs_percentile(abs_at[1 + kQuantPhi1], percentile)));
    const int n2 = choose_scale_exp(double(abs_percentile(abs_at[1 + kQuantPhi2], percentile)));
    const int n3 =
        choose_scale_exp(double(abs_percentile(abs_at[1 + kQuantPhi3Depthwise], percentile)));
    const int n4 = choose_scale_exp(double(abs_percentile(abs_at[1 + kQuantPhi3], percentile)));

    QuantNetwork qnet;
    qnet.config = c;
    qnet.input_scale_exp = n_in;

    QuantStage s0;
    s0.kind = StageKind::kSpatialConv;
    s0.weights = quantize_weights(net.spatial.weights, false);
    s0.in_scale_exp = n_in;
    s0.out_scale_exp = n1;
    s0.requant = fold_bn(s0.weights.scale_exp, net.bn1, n_in, n1);

    QuantStage s1;
    s1.kind = StageKind::kTemporalConv;
    s1.weights = quantize_weights(net.temporal.weights, true);
    s1.relu = true;
    s1.pool = c.pool;  // mean over int8 values, same grid on both sides
    s1.in_scale_exp = n1;
    s1.out_scale_exp = n2;
    s1.requant = fold_bn(s1.weights.scale_exp, net.bn2, n1, n2);

    QuantStage s2;
    s2.kind = StageKind::kTemporalConv;
    s2.weights = quantize_weights(net.sep_depthwise.weights, true);
    s2.in_scale_exp = n2;
    s2.out_scale_exp = n3;
    s2.requant = fold_rescale(c.n_k, s2.weights.scale_exp, n2, n3);

    QuantStage s3;
    s3.kind = StageKind::kPointwiseConv;
    s3.weights = quantize_weights(net.pointwise.weights, false);
    s3.relu = true;
    s3.pool = c.pool;
    s3.in_scale_exp = n3;
    s3.out_scale_exp = n4;
    s3.requant = fold_bn(s3.weights.scale_exp, net.bn3, n3, n4);

    QuantStage s4;
    s4.kind = StageKind::kFullyConnected;
    s4.weights = quantize_weights(net.fc.weights, false);
    s4.in_scale_exp = n4;
    const int acc_exp = n4 + s4.weights.scale_exp;
    s4.out_scale_exp = acc_exp;
    s4.bias.resize(c.n_cl);
    for (int o = 0; o < c.n_cl; ++o) {
        const int64_t b = std::llround(std::ldexp(double(net.fc.bias(o)), acc_exp));
        if (std::llabs(b) > INT32_MAX)
            throw ValidationError("export: FC bias exceeds the accumulator domain");
        s4.bias[o] = static_cast<int32_t>(b);
    }
    qnet.logit_scale_exp = acc_exp;

    qnet.stages = {std::move(s0), std::move(s1), std::move(s2), std::move(s3), std::move(s4)};
    validate(qnet);
    return qnet;
}

std::pair<QuantTensor, int64_t> quantize_input(const QuantNetwork& qnet, const Mat<float>& x) {
    if (x.rows() != qnet.config.n_ch || x.cols() != qnet.config.n_s)
        throw ShapeError("quantize_input: trial does not match the network config");
    QuantizeResult r = quantize(x, qnet.input_scale_exp);
    return {std::move(r.tensor), r.saturated};
}

}  // namespace mibminet
