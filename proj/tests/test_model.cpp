#include "mibminet/model.hpp"

#include "mibminet/nn_ops.hpp"

#include <doctest.h>

using namespace mibminet;

namespace {

MatF random_input(const ModelConfig& c, uint64_t seed) {
    Rng rng(seed);
    MatF x(c.n_ch, c.n_s);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = float(rng.uniform(-1, 1));
    return x;
}

}  // namespace

TEST_CASE("config validation and derived sizes") {
    ModelConfig bci{22, 750, 32, 64, 4};
    bci.validate();
    CHECK(bci.fc_inputs() == 352);

    ModelConfig physio{64, 480, 16, 128, 4};
    CHECK(physio.len_after_pool1() == 60);
    CHECK(physio.len_after_pool2() == 7);
    CHECK(physio.fc_inputs() == 112);

    ModelConfig tiny{1, 64, 1, 3, 2};
    tiny.validate();
    CHECK(tiny.fc_inputs() == 1);

    ModelConfig bad{0, 750, 32, 64, 4};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    ModelConfig short_ns{4, 60, 4, 8, 2};
    CHECK_THROWS_AS(short_ns.validate(), ValidationError);
}

TEST_CASE("build produces the published parameter counts") {
    Network bci = build({22, 750, 32, 64, 4}, 1);
    CHECK(bci.parameter_count() == 6084);
    CHECK(bci.fc.weights.cols() == 352);
    CHECK((bci.fc.weights.size() + bci.fc.bias.size()) == 1412);

    Network physio = build({64, 480, 16, 128, 4}, 1);
    CHECK(physio.parameter_count() == 4228);
    CHECK(physio.config.fc_inputs() == 112);

    Network tiny = build({1, 64, 1, 3, 2}, 1);
    CHECK(tiny.fc.weights.cols() == 1);
}

TEST_CASE("build is reproducible and seed-sensitive") {
    ModelConfig c{4, 64, 4, 8, 2};
    Network a = build(c, 42), b = build(c, 42), other = build(c, 43);
    CHECK(a.spatial.weights == b.spatial.weights);
    CHECK(a.fc.weights == b.fc.weights);
    CHECK(a.spatial.weights != other.spatial.weights);
}

TEST_CASE("forward is deterministic and zero maps to zero") {
    ModelConfig c{4, 64, 4, 8, 2};
    Network net = build(c, 7);
    MatF x = random_input(c, 3);
    VecF l1 = forward(net, x), l2 = forward(net, x);
    CHECK(l1 == l2);

    // all-zero input with identity BN stats and zero biases stays zero
    VecF lz = forward(net, MatF::Zero(c.n_ch, c.n_s));
    CHECK(lz.cwiseAbs().maxCoeff() == 0.0f);

    CHECK_THROWS_AS(forward(net, MatF::Zero(3, c.n_s)), ShapeError);
}

TEST_CASE("forward equals composing the reference ops one by one") {
    ModelConfig c{5, 128, 6, 12, 3};
    Network net = build(c, 99);
    // exercise non-identity BN statistics
    Rng rng(5);
    for (auto* bn : {&net.bn1, &net.bn2, &net.bn3}) {
        for (Eigen::Index i = 0; i < bn->features(); ++i) {
            bn->gamma(i) = float(rng.uniform(0.5, 1.5));
            bn->beta(i) = float(rng.uniform(-0.3, 0.3));
            bn->running_mean(i) = float(rng.uniform(-0.2, 0.2));
            bn->running_var(i) = float(rng.uniform(0.5, 2.0));
        }
    }
    MatF x = random_input(c, 11);

    MatF cur = batchnorm_forward_infer(spatial_conv_forward(x, net.spatial), net.bn1);
    cur = avg_pool(
        relu(batchnorm_forward_infer(temporal_depthwise_forward(cur, net.temporal), net.bn2)), 8);
    cur = temporal_depthwise_forward(cur, net.sep_depthwise);
    cur = avg_pool(
        relu(batchnorm_forward_infer(pointwise_conv_forward(cur, net.pointwise), net.bn3)), 8);
    Eigen::Map<const VecF> flat(cur.data(), cur.size());
    VecF expected = fully_connected(VecF(flat), net.fc);

    VecF got = forward(net, x);
    CHECK((got - expected).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("positive input scaling preserves argmax with affine-only BN and zero bias") {
    ModelConfig c{4, 64, 4, 8, 3};
    Network net = build(c, 13);
    net.fc.bias.setZero();  // defaults, but explicit for the property
    MatF x = random_input(c, 21);
    VecF base = forward(net, x);
    Eigen::Index arg_base = 0;
    base.maxCoeff(&arg_base);
    for (float scale : {0.5f, 2.0f, 7.0f}) {
        VecF scaled = forward(net, MatF(scale * x));
        Eigen::Index arg = 0;
        scaled.maxCoeff(&arg);
        CHECK(arg == arg_base);
    }
}

TEST_CASE("macc instrumentation matches the plan") {
    ModelConfig c{22, 750, 32, 64, 4};
    Network net = build(c, 1);
    ForwardStats stats;
    forward(net, MatF::Zero(c.n_ch, c.n_s), nullptr, &stats);
    CHECK(stats.maccs == layer_plan(c).macc_total());
}

TEST_CASE("layer plan: published peak pairs") {
    LayerPlan bci = layer_plan(ModelConfig{22, 750, 32, 64, 4});
    CHECK(bci.steps[0].in_features == 16500);
    CHECK(bci.steps[0].out_features == 24000);
    CHECK(bci.peak_feature_pair() == 40500);
    CHECK(bci.params_total() == 6084);

    LayerPlan physio = layer_plan(ModelConfig{64, 480, 16, 128, 4});
    CHECK(physio.peak_feature_pair() == 38400);

    LayerPlan reduced = layer_plan(ModelConfig{10, 480, 16, 128, 2});
    CHECK(reduced.peak_feature_pair() == 12480);
}

TEST_CASE("fc input formula across random configs") {
    Rng rng(31);
    for (int it = 0; it < 40; ++it) {
        ModelConfig c{1 + int(rng.below(8)), 64 + 8 * int(rng.below(32)), 1 + int(rng.below(8)),
                      1 + int(rng.below(16)), 2 + int(rng.below(3))};
        c.validate();
        CHECK(c.fc_inputs() == c.n_k * ((c.n_s / 8) / 8));
        LayerPlan plan = layer_plan(c);
        CHECK(plan.steps.back().in_features == c.fc_inputs());
        Network net = build(c, 1);
        CHECK(net.fc.weights.cols() == c.fc_inputs());
    }
}

TEST_CASE("train forward: batch statistics update running stats") {
    ModelConfig c{4, 64, 4, 8, 2};
    Network net = build(c, 3);
    Batch<float> xs = {random_input(c, 1), random_input(c, 2), random_input(c, 3)};
    TrainCache cache;
    VecF mean_before = net.bn1.running_mean;
    auto logits = forward_train(net, xs, nullptr, cache);
    CHECK(logits.size() == 3);
    CHECK(net.bn1.running_mean != mean_before);
    CHECK(cache.phi2_pool[0].cols() == c.len_after_pool1());
}

TEST_CASE("train forward/backward is identical across worker counts") {
    ModelConfig c{4, 64, 4, 8, 2};
    Batch<float> xs = {random_input(c, 1), random_input(c, 2), random_input(c, 3),
                       random_input(c, 4), random_input(c, 5)};
    std::vector<VecF> dlogits;
    for (size_t i = 0; i < xs.size(); ++i) {
        VecF d(c.n_cl);
        d << 0.3f, -0.7f;
        dlogits.push_back(d);
    }
    Network net1 = build(c, 9), net4 = build(c, 9);
    TrainCache cache1, cache4;
    auto l1 = forward_train(net1, xs, nullptr, cache1, 0.1f, 1);
    auto l4 = forward_train(net4, xs, nullptr, cache4, 0.1f, 4);
    for (size_t i = 0; i < xs.size(); ++i) CHECK(l1[i] == l4[i]);
    NetworkGrads g1 = backward_train(net1, cache1, dlogits, 1);
    NetworkGrads g4 = backward_train(net4, cache4, dlogits, 4);
    CHECK(g1.spatial_w == g4.spatial_w);
    CHECK(g1.temporal_w == g4.temporal_w);
    CHECK(g1.fc_w == g4.fc_w);
    CHECK(g1.bn2_gamma == g4.bn2_gamma);
}

TEST_CASE("straight-through estimator: quant grads equal the identity-node chain at quantized activations") {
    // Direct construction: backpropagate by hand through the op chain,
    // treating every quantize-dequantize node as the identity and reading
    // its quantized output from the forward cache. The trainer's gradients
    // must match exactly; any STE masking or clipping would break this.
    ModelConfig c{4, 64, 4, 8, 2};
    Network net = build(c, 17);
    Batch<float> xs = {random_input(c, 31), random_input(c, 32)};
    std::vector<VecF> dlogits(2, VecF::Ones(c.n_cl));

    ActQuant aq;
    aq.enabled = true;
    aq.track = true;
    TrainCache cache;
    forward_train(net, xs, &aq, cache);
    NetworkGrads got = backward_train(net, cache, dlogits);

    NetworkGrads want = NetworkGrads::zero(c);
    Batch<float> d_pool3(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        Eigen::Map<const VecF> flat(cache.phi3_pool[i].data(), cache.phi3_pool[i].size());
        VecF dx;
        MatF dw;
        VecF db;
        fully_connected_backward(VecF(flat), net.fc, dlogits[i], dx, dw, db);
        want.fc_w += dw;
        d_pool3[i] = Eigen::Map<const MatF>(dx.data(), c.n_k, c.len_after_pool2());
    }
    Batch<float> d_bn3(xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
        d_bn3[i] = relu_backward(cache.phi3_bn[i],
                                 MatF(avg_pool_backward(c.len_after_pool1(), d_pool3[i], c.pool)));
    Batch<float> d_pw;
    batchnorm_backward_train(d_bn3, net.bn3, cache.bn3, d_pw, want.bn3_gamma, want.bn3_beta);
    for (size_t i = 0; i < xs.size(); ++i) {
        MatF dx_pw, dw_pw;
        pointwise_conv_backward(cache.phi3_dw[i], net.pointwise, d_pw[i], dx_pw, dw_pw);
        want.pointwise_w += dw_pw;
        MatF dx_dw, dw_dw;
        temporal_depthwise_backward(cache.phi2_pool[i], net.sep_depthwise, dx_pw, dx_dw, dw_dw);
        want.sep_dw_w += dw_dw;
    }

    CHECK(got.fc_w == want.fc_w);
    CHECK(got.pointwise_w == want.pointwise_w);
    CHECK(got.sep_dw_w == want.sep_dw_w);
    CHECK(got.bn3_gamma == want.bn3_gamma);

    // the FC gradient is evaluated at the quantized activations, not the
    // float ones
    bool any_quantized_diff = false;
    MatF unquantized = avg_pool(relu(cache.phi3_bn[0]), c.pool);
    any_quantized_diff = (unquantized != cache.phi3_pool[0]);
    CHECK(any_quantized_diff);
}
