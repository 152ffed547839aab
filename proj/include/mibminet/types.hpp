#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mibminet {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

/// A batch of per-trial feature maps (one matrix per trial).
template <class Scalar>
using Batch = std::vector<Mat<Scalar>>;

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major tensor with an explicit extent list. Rank-2 views map onto
/// Eigen matrices; higher ranks only carry data between reshapes.
template <class Scalar>
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<Eigen::Index> shape, std::vector<Scalar> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (element_count(shape_) != static_cast<Eigen::Index>(data_.size()))
            throw ShapeError("tensor: shape does not match data length");
    }
    explicit Tensor(const Mat<Scalar>& m)
        : shape_{m.rows(), m.cols()}, data_(m.data(), m.data() + m.size()) {}

    static Eigen::Index element_count(const std::vector<Eigen::Index>& shape) {
        Eigen::Index n = 1;
        for (Eigen::Index e : shape) {
            if (e < 0) throw ShapeError("tensor: negative extent");
            n *= e;
        }
        return n;
    }

    const std::vector<Eigen::Index>& shape() const { return shape_; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(data_.size()); }
    const std::vector<Scalar>& data() const { return data_; }
    std::vector<Scalar>& data() { return data_; }

    Eigen::Map<const Mat<Scalar>> matrix() const {
        if (shape_.size() != 2) throw ShapeError("tensor: matrix view needs rank 2");
        return {data_.data(), shape_[0], shape_[1]};
    }

private:
    std::vector<Eigen::Index> shape_;
    std::vector<Scalar> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Symmetric int8 tensor; value = data * 2^(-scale_exp), zero point fixed at 0.
struct QuantTensor {
    std::vector<Eigen::Index> shape;
    std::vector<int8_t> data;
    int scale_exp = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(data.size()); }
    Eigen::Index rows() const { return shape.at(0); }
    Eigen::Index cols() const { return shape.at(1); }
    int8_t at(Eigen::Index r, Eigen::Index c) const { return data[r * cols() + c]; }
};

/// Deterministic uniform generator. mt19937_64 is fully specified by the
/// standard; the float mapping below avoids std::uniform_real_distribution,
/// whose output is implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next() {
        // splitmix64: tiny, seedable, well spread
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next() % n : 0; }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    uint64_t state_;
};

/// Runs fn(i) for i in [0, n) across `workers` threads in contiguous chunks.
/// Each index is processed exactly once and writes only its own outputs, so
/// results are independent of the worker count.
template <class F>
void parallel_for(size_t n, int workers, F&& fn) {
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t threads = std::min<size_t>(static_cast<size_t>(workers), n);
    const size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (size_t t = 0; t < threads; ++t) {
        const size_t lo = t * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// FNV-1a over raw bytes, used for config digests.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}
inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace mibminet
