#include "mibminet/model.hpp"

#include "mibminet/numerics.hpp"

#include <cmath>

namespace mibminet {

void ModelConfig::validate() const {
    if (n_ch < 1 || n_s < 1 || n_k < 1 || n_f < 1 || n_cl < 1)
        throw ValidationError("model config: all dimensions must be >= 1");
    if (pool != 8) throw ValidationError("model config: pool size is fixed at 8");
    if (sep_kernel != 16) throw ValidationError("model config: separable kernel is fixed at 16");
    if (len_after_pool2() < 1)
        throw ValidationError("model config: n_s too short, two pool-by-8 stages need n_s >= 64");
}

int64_t Network::parameter_count() const {
    return spatial.weights.size() + 4 * bn1.features() + temporal.weights.size() +
           4 * bn2.features() + sep_depthwise.weights.size() + pointwise.weights.size() +
           4 * bn3.features() + fc.weights.size() + fc.bias.size();
}

namespace {

MatF glorot_uniform(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out,
                    Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    MatF w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            w(r, c) = static_cast<float>(rng.uniform(-limit, limit));
    return w;
}

BatchNormParams<float> identity_bn(Eigen::Index features) {
    BatchNormParams<float> p;
    p.gamma = VecF::Ones(features);
    p.beta = VecF::Zero(features);
    p.running_mean = VecF::Zero(features);
    p.running_var = VecF::Ones(features);
    p.epsilon = 1e-5f;
    return p;
}

}  // namespace

Network build(const ModelConfig& config, uint64_t init_seed) {
    config.validate();
    Rng rng(init_seed);
    Network net;
    net.config = config;
    net.spatial.weights = glorot_uniform(config.n_k, config.n_ch, config.n_ch, config.n_k, rng);
    net.bn1 = identity_bn(config.n_k);
    net.temporal.weights = glorot_uniform(config.n_k, config.n_f, config.n_f, config.n_f, rng);
    net.bn2 = identity_bn(config.n_k);
    net.sep_depthwise.weights =
        glorot_uniform(config.n_k, config.sep_kernel, config.sep_kernel, config.sep_kernel, rng);
    net.pointwise.weights = glorot_uniform(config.n_k, config.n_k, config.n_k, config.n_k, rng);
    net.bn3 = identity_bn(config.n_k);
    net.fc.weights = glorot_uniform(config.n_cl, config.fc_inputs(), config.fc_inputs(),
                                    config.n_cl, rng);
    net.fc.bias = VecF::Zero(config.n_cl);
    return net;
}

namespace {

void fake_quant_inplace(MatF& m, int scale_exp) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = fake_quant_value(m.data()[i], scale_exp);
}

/// Updates the running |activation| maximum for a quant point (when
/// tracking), refreshes its scale, and pushes the batch through the
/// quantize-dequantize grid.
void apply_act_quant(Batch<float>& xs, ActQuant* aq, QuantPoint point) {
    if (!aq || !aq->enabled) return;
    if (aq->track) {
        double amax = aq->amax[point];
        for (const auto& x : xs) amax = std::max(amax, double(x.cwiseAbs().maxCoeff()));
        aq->amax[point] = amax;
        aq->scale_exp[point] = choose_scale_exp(amax);
    }
    for (auto& x : xs) fake_quant_inplace(x, aq->scale_exp[point]);
}

void apply_act_quant(MatF& x, const ActQuant* aq, QuantPoint point) {
    if (!aq || !aq->enabled) return;
    fake_quant_inplace(x, aq->scale_exp[point]);
}

}  // namespace

Vec<float> forward(const Network& net, const Mat<float>& x, const ActQuant* aq,
                   ForwardStats* stats) {
    const ModelConfig& c = net.config;
    if (x.rows() != c.n_ch || x.cols() != c.n_s)
        throw ShapeError("forward: input must be [n_ch x n_s]");

    auto count = [&](int64_t m) {
        if (stats) stats->maccs += m;
    };

    MatF cur = x;
    apply_act_quant(cur, aq, kQuantInput);

    cur = spatial_conv_forward(cur, net.spatial);
    count(int64_t(c.n_ch) * c.n_s * c.n_k);
    cur = batchnorm_forward_infer(cur, net.bn1);
    apply_act_quant(cur, aq, kQuantPhi1);

    cur = temporal_depthwise_forward(cur, net.temporal);
    count(int64_t(c.n_f) * c.n_s * c.n_k);
    cur = relu(batchnorm_forward_infer(cur, net.bn2));
    apply_act_quant(cur, aq, kQuantPhi2);  // int8 materializes before the pool
    cur = avg_pool(cur, c.pool);

    cur = temporal_depthwise_forward(cur, net.sep_depthwise);
    count(int64_t(c.sep_kernel) * c.len_after_pool1() * c.n_k);
    apply_act_quant(cur, aq, kQuantPhi3Depthwise);
    cur = pointwise_conv_forward(cur, net.pointwise);
    count(int64_t(c.n_k) * c.n_k * c.len_after_pool1());
    cur = relu(batchnorm_forward_infer(cur, net.bn3));
    apply_act_quant(cur, aq, kQuantPhi3);
    cur = avg_pool(cur, c.pool);

    Eigen::Map<const VecF> flat(cur.data(), cur.size());
    count(int64_t(c.fc_inputs()) * c.n_cl);
    return fully_connected(VecF(flat), net.fc);
}

std::vector<Vec<float>> forward_train(Network& net, const Batch<float>& xs, ActQuant* aq,
                                      TrainCache& cache, float bn_momentum, int workers) {
    const ModelConfig& c = net.config;
    if (xs.empty()) throw ShapeError("forward_train: empty batch");
    for (const auto& x : xs)
        if (x.rows() != c.n_ch || x.cols() != c.n_s)
            throw ShapeError("forward_train: input must be [n_ch x n_s]");
    const size_t b = xs.size();

    cache.input = xs;
    apply_act_quant(cache.input, aq, kQuantInput);

    cache.phi1_conv.resize(b);
    parallel_for(b, workers,
                 [&](size_t i) { cache.phi1_conv[i] = spatial_conv_forward(cache.input[i], net.spatial); });
    cache.phi1_out = batchnorm_forward_train(cache.phi1_conv, net.bn1, bn_momentum, &cache.bn1);
    apply_act_quant(cache.phi1_out, aq, kQuantPhi1);

    cache.phi2_conv.resize(b);
    parallel_for(b, workers, [&](size_t i) {
        cache.phi2_conv[i] = temporal_depthwise_forward(cache.phi1_out[i], net.temporal);
    });
    cache.phi2_bn = batchnorm_forward_train(cache.phi2_conv, net.bn2, bn_momentum, &cache.bn2);
    Batch<float> phi2_relu(b);
    parallel_for(b, workers, [&](size_t i) { phi2_relu[i] = relu(cache.phi2_bn[i]); });
    apply_act_quant(phi2_relu, aq, kQuantPhi2);  // int8 materializes before the pool
    cache.phi2_pool.resize(b);
    parallel_for(b, workers,
                 [&](size_t i) { cache.phi2_pool[i] = avg_pool(phi2_relu[i], c.pool); });

    cache.phi3_dw.resize(b);
    parallel_for(b, workers, [&](size_t i) {
        cache.phi3_dw[i] = temporal_depthwise_forward(cache.phi2_pool[i], net.sep_depthwise);
    });
    apply_act_quant(cache.phi3_dw, aq, kQuantPhi3Depthwise);
    cache.phi3_pw.resize(b);
    parallel_for(b, workers, [&](size_t i) {
        cache.phi3_pw[i] = pointwise_conv_forward(cache.phi3_dw[i], net.pointwise);
    });
    cache.phi3_bn = batchnorm_forward_train(cache.phi3_pw, net.bn3, bn_momentum, &cache.bn3);
    Batch<float> phi3_relu(b);
    parallel_for(b, workers, [&](size_t i) { phi3_relu[i] = relu(cache.phi3_bn[i]); });
    apply_act_quant(phi3_relu, aq, kQuantPhi3);
    cache.phi3_pool.resize(b);
    parallel_for(b, workers,
                 [&](size_t i) { cache.phi3_pool[i] = avg_pool(phi3_relu[i], c.pool); });

    std::vector<VecF> logits(b);
    parallel_for(b, workers, [&](size_t i) {
        Eigen::Map<const VecF> flat(cache.phi3_pool[i].data(), cache.phi3_pool[i].size());
        logits[i] = fully_connected(VecF(flat), net.fc);
    });
    return logits;
}

NetworkGrads NetworkGrads::zero(const ModelConfig& c) {
    NetworkGrads g;
    g.spatial_w = MatF::Zero(c.n_k, c.n_ch);
    g.temporal_w = MatF::Zero(c.n_k, c.n_f);
    g.sep_dw_w = MatF::Zero(c.n_k, c.sep_kernel);
    g.pointwise_w = MatF::Zero(c.n_k, c.n_k);
    g.fc_w = MatF::Zero(c.n_cl, c.fc_inputs());
    g.fc_b = VecF::Zero(c.n_cl);
    g.bn1_gamma = VecF::Zero(c.n_k);
    g.bn1_beta = VecF::Zero(c.n_k);
    g.bn2_gamma = VecF::Zero(c.n_k);
    g.bn2_beta = VecF::Zero(c.n_k);
    g.bn3_gamma = VecF::Zero(c.n_k);
    g.bn3_beta = VecF::Zero(c.n_k);
    return g;
}

NetworkGrads backward_train(const Network& net, const TrainCache& cache,
                            const std::vector<Vec<float>>& dlogits, int workers) {
    const ModelConfig& c = net.config;
    const size_t b = cache.input.size();
    if (dlogits.size() != b) throw ShapeError("backward_train: gradient batch size mismatch");
    NetworkGrads g = NetworkGrads::zero(c);

    // phi4 head; unflatten the input gradient back to [n_k x len]
    Batch<float> d_pool3(b);
    std::vector<MatF> dw_slots(b);
    std::vector<VecF> db_slots(b);
    parallel_for(b, workers, [&](size_t i) {
        Eigen::Map<const VecF> flat(cache.phi3_pool[i].data(), cache.phi3_pool[i].size());
        VecF dx;
        fully_connected_backward(VecF(flat), net.fc, dlogits[i], dx, dw_slots[i], db_slots[i]);
        d_pool3[i] = Eigen::Map<const MatF>(dx.data(), c.n_k, c.len_after_pool2());
    });
    for (size_t i = 0; i < b; ++i) {
        g.fc_w += dw_slots[i];
        g.fc_b += db_slots[i];
    }

    // phi3: pool -> ReLU -> BN -> pointwise -> (quant, identity grad) -> depthwise
    Batch<float> d_bn3(b);
    parallel_for(b, workers, [&](size_t i) {
        MatF d_relu = avg_pool_backward(c.len_after_pool1(), d_pool3[i], c.pool);
        d_bn3[i] = relu_backward(cache.phi3_bn[i], d_relu);
    });
    Batch<float> d_pw;
    batchnorm_backward_train(d_bn3, net.bn3, cache.bn3, d_pw, g.bn3_gamma, g.bn3_beta);
    Batch<float> d_pool2(b);
    std::vector<MatF> dw_pw_slots(b), dw_dw_slots(b);
    parallel_for(b, workers, [&](size_t i) {
        MatF dx_pw;
        pointwise_conv_backward(cache.phi3_dw[i], net.pointwise, d_pw[i], dx_pw, dw_pw_slots[i]);
        MatF dx_dw;
        temporal_depthwise_backward(cache.phi2_pool[i], net.sep_depthwise, dx_pw, dx_dw,
                                    dw_dw_slots[i]);
        d_pool2[i] = std::move(dx_dw);
    });
    for (size_t i = 0; i < b; ++i) {
        g.pointwise_w += dw_pw_slots[i];
        g.sep_dw_w += dw_dw_slots[i];
    }

    // phi2: pool -> ReLU -> BN -> temporal depthwise
    Batch<float> d_bn2(b);
    parallel_for(b, workers, [&](size_t i) {
        MatF d_relu = avg_pool_backward(c.n_s, d_pool2[i], c.pool);
        d_bn2[i] = relu_backward(cache.phi2_bn[i], d_relu);
    });
    Batch<float> d_phi1_out;
    batchnorm_backward_train(d_bn2, net.bn2, cache.bn2, d_phi1_out, g.bn2_gamma, g.bn2_beta);
    Batch<float> d_conv1(b);
    std::vector<MatF> dw_t_slots(b);
    parallel_for(b, workers, [&](size_t i) {
        MatF dx;
        temporal_depthwise_backward(cache.phi1_out[i], net.temporal, d_phi1_out[i], dx,
                                    dw_t_slots[i]);
        d_conv1[i] = std::move(dx);
    });
    for (size_t i = 0; i < b; ++i) g.temporal_w += dw_t_slots[i];

    // phi1: BN -> spatial conv
    Batch<float> d_spatial;
    batchnorm_backward_train(d_conv1, net.bn1, cache.bn1, d_spatial, g.bn1_gamma, g.bn1_beta);
    std::vector<MatF> dw_s_slots(b);
    parallel_for(b, workers, [&](size_t i) {
        MatF dx;
        spatial_conv_backward(cache.input[i], net.spatial, d_spatial[i], dx, dw_s_slots[i]);
    });
    for (size_t i = 0; i < b; ++i) g.spatial_w += dw_s_slots[i];
    return g;
}

LayerPlan layer_plan(const ModelConfig& c) {
    c.validate();
    const int64_t l1 = c.n_s;
    const int64_t l2 = c.len_after_pool1();
    const int64_t l3 = c.len_after_pool2();
    LayerPlan plan;
    plan.steps = {
        {"phi1.spatial_conv+bn", int64_t(c.n_ch) * c.n_s, int64_t(c.n_k) * l1,
         int64_t(c.n_k) * c.n_ch + 4 * c.n_k, int64_t(c.n_ch) * c.n_s * c.n_k},
        {"phi2.temporal_conv+bn+relu+pool", int64_t(c.n_k) * l1, int64_t(c.n_k) * l2,
         int64_t(c.n_k) * c.n_f + 4 * c.n_k, int64_t(c.n_f) * c.n_s * c.n_k},
        {"phi3.separable_conv+bn+relu+pool", int64_t(c.n_k) * l2, int64_t(c.n_k) * l3,
         int64_t(c.sep_kernel) * c.n_k + int64_t(c.n_k) * c.n_k + 4 * c.n_k,
         (int64_t(c.sep_kernel) * c.n_k + int64_t(c.n_k) * c.n_k) * l2},
        {"phi4.fc", int64_t(c.fc_inputs()), c.n_cl, (int64_t(c.fc_inputs()) + 1) * c.n_cl,
         int64_t(c.fc_inputs()) * c.n_cl},
    };
    return plan;
}

int64_t LayerPlan::peak_feature_pair() const {
    int64_t peak = 0;
    for (const auto& s : steps) peak = std::max(peak, s.in_features + s.out_features);
    return peak;
}

int64_t LayerPlan::params_total() const {
    int64_t t = 0;
    for (const auto& s : steps) t += s.params;
    return t;
}

int64_t LayerPlan::macc_total() const {
    int64_t t = 0;
    for (const auto& s : steps) t += s.maccs;
    return t;
}

}  // namespace mibminet
