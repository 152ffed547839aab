#pragma once

#include "mibminet/types.hpp"

#include <cmath>
#include <utility>

namespace mibminet {

// Layer parameter blocks. Convolutions are bias-free; only the classifier
// head carries a bias.

template <class S>
struct SpatialConvParams {
    Mat<S> weights;  // [n_filters x n_channels], one row per spatial filter
};

template <class S>
struct TemporalConvParams {
    Mat<S> weights;  // [n_maps x kernel_len], one depthwise kernel per map
};

template <class S>
struct PointwiseConvParams {
    Mat<S> weights;  // [n_out x n_in]
};

template <class S>
struct BatchNormParams {
    Vec<S> gamma, beta, running_mean, running_var;
    S epsilon = static_cast<S>(1e-5);

    Eigen::Index features() const { return gamma.size(); }
};

template <class S>
struct FcParams {
    Mat<S> weights;  // [n_out x n_in]
    Vec<S> bias;     // [n_out]
};

// ---------------------------------------------------------------------------
// Spatial convolution: one 1-D kernel per filter spanning all channels at a
// single time point. Equivalent to a matrix product over the channel axis.

template <class S>
Mat<S> spatial_conv_forward(const Mat<S>& x, const SpatialConvParams<S>& p) {
    if (p.weights.cols() != x.rows())
        throw ShapeError("spatial_conv: weight columns must match input channels");
    return p.weights * x;
}

template <class S>
void spatial_conv_backward(const Mat<S>& x, const SpatialConvParams<S>& p, const Mat<S>& dy,
                           Mat<S>& dx, Mat<S>& dw) {
    dx = p.weights.transpose() * dy;
    dw = dy * x.transpose();
}

// ---------------------------------------------------------------------------
// Temporal depthwise convolution, cross-correlation orientation, same
// padding. Zero padding splits floor((K-1)/2) left, ceil((K-1)/2) right so
// the output length equals the input length.

inline Eigen::Index same_pad_left(Eigen::Index kernel_len) { return (kernel_len - 1) / 2; }

template <class S>
Mat<S> temporal_depthwise_forward(const Mat<S>& x, const TemporalConvParams<S>& p) {
    const Eigen::Index maps = x.rows(), len = x.cols(), k = p.weights.cols();
    if (p.weights.rows() != maps)
        throw ShapeError("temporal_conv: one kernel per feature map required");
    if (k > len + 2 * (k / 2)) throw ShapeError("temporal_conv: kernel longer than padded input");
    const Eigen::Index pad = same_pad_left(k);
    Mat<S> out(maps, len);
    for (Eigen::Index m = 0; m < maps; ++m) {
        for (Eigen::Index t = 0; t < len; ++t) {
            S acc = 0;
            for (Eigen::Index j = 0; j < k; ++j) {
                const Eigen::Index s = t + j - pad;
                if (s >= 0 && s < len) acc += p.weights(m, j) * x(m, s);
            }
            out(m, t) = acc;
        }
    }
    return out;
}

template <class S>
void temporal_depthwise_backward(const Mat<S>& x, const TemporalConvParams<S>& p, const Mat<S>& dy,
                                 Mat<S>& dx, Mat<S>& dw) {
    const Eigen::Index maps = x.rows(), len = x.cols(), k = p.weights.cols();
    const Eigen::Index pad = same_pad_left(k);
    dx = Mat<S>::Zero(maps, len);
    dw = Mat<S>::Zero(maps, k);
    for (Eigen::Index m = 0; m < maps; ++m) {
        for (Eigen::Index t = 0; t < len; ++t) {
            const S g = dy(m, t);
            for (Eigen::Index j = 0; j < k; ++j) {
                const Eigen::Index s = t + j - pad;
                if (s >= 0 && s < len) {
                    dx(m, s) += p.weights(m, j) * g;
                    dw(m, j) += x(m, s) * g;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pointwise (1x1) convolution: per-time-point matrix-vector product.

template <class S>
Mat<S> pointwise_conv_forward(const Mat<S>& x, const PointwiseConvParams<S>& p) {
    if (p.weights.cols() != x.rows())
        throw ShapeError("pointwise_conv: weight columns must match input maps");
    return p.weights * x;
}

template <class S>
void pointwise_conv_backward(const Mat<S>& x, const PointwiseConvParams<S>& p, const Mat<S>& dy,
                             Mat<S>& dx, Mat<S>& dw) {
    dx = p.weights.transpose() * dy;
    dw = dy * x.transpose();
}

// ---------------------------------------------------------------------------
// Batch normalization over feature rows. Train mode normalizes with batch
// statistics pooled across trials and time, and updates the running
// statistics in place with the given momentum.

template <class S>
struct BatchNormCache {
    Vec<S> mean, inv_std;
    Batch<S> xhat;
};

template <class S>
Mat<S> batchnorm_forward_infer(const Mat<S>& x, const BatchNormParams<S>& p) {
    if (x.rows() != p.features()) throw ShapeError("batchnorm: feature count mismatch");
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index f = 0; f < x.rows(); ++f) {
        const S inv = S(1) / std::sqrt(p.running_var(f) + p.epsilon);
        out.row(f) = (x.row(f).array() - p.running_mean(f)) * inv * p.gamma(f) + p.beta(f);
    }
    return out;
}

template <class S>
Batch<S> batchnorm_forward_train(const Batch<S>& xs, BatchNormParams<S>& p, S momentum,
                                 BatchNormCache<S>* cache) {
    if (xs.empty()) throw ShapeError("batchnorm: empty batch");
    const Eigen::Index features = xs.front().rows();
    if (features != p.features()) throw ShapeError("batchnorm: feature count mismatch");
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size()) * xs.front().cols();

    Vec<S> mean = Vec<S>::Zero(features), var = Vec<S>::Zero(features);
    for (const auto& x : xs) mean += x.rowwise().sum();
    mean /= static_cast<S>(n);
    for (const auto& x : xs)
        var += (x.colwise() - mean).array().square().matrix().rowwise().sum();
    var /= static_cast<S>(n);

    p.running_mean = (S(1) - momentum) * p.running_mean + momentum * mean;
    p.running_var = (S(1) - momentum) * p.running_var + momentum * var;

    Vec<S> inv_std = (var.array() + p.epsilon).rsqrt();
    Batch<S> out(xs.size());
    if (cache) {
        cache->mean = mean;
        cache->inv_std = inv_std;
        cache->xhat.resize(xs.size());
    }
    for (size_t i = 0; i < xs.size(); ++i) {
        Mat<S> xhat = (xs[i].colwise() - mean).array().colwise() * inv_std.array();
        out[i] = (xhat.array().colwise() * p.gamma.array()).colwise() + p.beta.array();
        if (cache) cache->xhat[i] = std::move(xhat);
    }
    return out;
}

template <class S>
void batchnorm_backward_train(const Batch<S>& dys, const BatchNormParams<S>& p,
                              const BatchNormCache<S>& cache, Batch<S>& dxs, Vec<S>& dgamma,
                              Vec<S>& dbeta) {
    const Eigen::Index features = p.features();
    const Eigen::Index n = static_cast<Eigen::Index>(dys.size()) * dys.front().cols();
    dgamma = Vec<S>::Zero(features);
    dbeta = Vec<S>::Zero(features);
    Vec<S> sum_dxhat = Vec<S>::Zero(features), sum_dxhat_xhat = Vec<S>::Zero(features);
    for (size_t i = 0; i < dys.size(); ++i) {
        dgamma += (dys[i].array() * cache.xhat[i].array()).matrix().rowwise().sum();
        dbeta += dys[i].rowwise().sum();
        Mat<S> dxhat = dys[i].array().colwise() * p.gamma.array();
        sum_dxhat += dxhat.rowwise().sum();
        sum_dxhat_xhat += (dxhat.array() * cache.xhat[i].array()).matrix().rowwise().sum();
    }
    dxs.resize(dys.size());
    const S inv_n = S(1) / static_cast<S>(n);
    for (size_t i = 0; i < dys.size(); ++i) {
        Mat<S> dxhat = dys[i].array().colwise() * p.gamma.array();
        Mat<S> centered = dxhat.array() -
                          (cache.xhat[i].array().colwise() * (sum_dxhat_xhat * inv_n).array()) -
                          ((Mat<S>::Ones(features, dys[i].cols()).array().colwise() *
                            (sum_dxhat * inv_n).array()));
        dxs[i] = centered.array().colwise() * cache.inv_std.array();
    }
}

// ---------------------------------------------------------------------------

template <class S>
Mat<S> relu(const Mat<S>& x) {
    return x.cwiseMax(S(0));
}

template <class S>
Mat<S> relu_backward(const Mat<S>& x, const Mat<S>& dy) {
    return (x.array() > S(0)).template cast<S>() * dy.array();
}

/// Non-overlapping mean pooling along time; the trailing remainder of fewer
/// than `k` samples is dropped.
template <class S>
Mat<S> avg_pool(const Mat<S>& x, Eigen::Index k = 8) {
    if (x.cols() < k) throw ShapeError("avg_pool: input shorter than pool window");
    const Eigen::Index windows = x.cols() / k;
    Mat<S> out(x.rows(), windows);
    for (Eigen::Index w = 0; w < windows; ++w)
        out.col(w) = x.middleCols(w * k, k).rowwise().mean();
    return out;
}

template <class S>
Mat<S> avg_pool_backward(Eigen::Index in_len, const Mat<S>& dy, Eigen::Index k = 8) {
    Mat<S> dx = Mat<S>::Zero(dy.rows(), in_len);
    const S inv = S(1) / static_cast<S>(k);
    for (Eigen::Index w = 0; w < dy.cols(); ++w)
        for (Eigen::Index j = 0; j < k; ++j) dx.col(w * k + j) = dy.col(w) * inv;
    return dx;
}

// ---------------------------------------------------------------------------

template <class S>
Vec<S> fully_connected(const Vec<S>& x, const FcParams<S>& p) {
    if (p.weights.cols() != x.size())
        throw ShapeError("fully_connected: weight columns must match input length");
    return p.weights * x + p.bias;
}

template <class S>
void fully_connected_backward(const Vec<S>& x, const FcParams<S>& p, const Vec<S>& dy, Vec<S>& dx,
                              Mat<S>& dw, Vec<S>& db) {
    dx = p.weights.transpose() * dy;
    dw = dy * x.transpose();
    db = dy;
}

/// Numerically stable softmax cross-entropy; returns the loss and the
/// gradient with respect to the logits.
template <class S>
std::pair<S, Vec<S>> softmax_cross_entropy(const Vec<S>& logits, Eigen::Index label) {
    if (label < 0 || label >= logits.size())
        throw ShapeError("softmax_cross_entropy: label out of range");
    const S m = logits.maxCoeff();
    Vec<S> shifted = logits.array() - m;
    Vec<S> exps = shifted.array().exp();
    const S z = exps.sum();
    Vec<S> probs = exps / z;
    const S loss = std::log(z) - shifted(label);
    Vec<S> grad = probs;
    grad(label) -= S(1);
    return {loss, grad};
}

template <class S>
Vec<S> softmax(const Vec<S>& logits) {
    Vec<S> shifted = logits.array() - logits.maxCoeff();
    Vec<S> exps = shifted.array().exp();
    return exps / exps.sum();
}

}  // namespace mibminet
