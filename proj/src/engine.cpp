#include "mibminet/engine.hpp"

#include "mibminet/estimator.hpp"

#include <cmath>
#include <sstream>

namespace mibminet {

namespace {

struct StageDims {
    Eigen::Index in_rows, in_len, out_rows, out_len, dot_len;
};

StageDims stage_dims(const QuantStage& s, Eigen::Index rows, Eigen::Index len) {
    StageDims d{rows, len, 0, 0, 0};
    switch (s.kind) {
        case StageKind::kSpatialConv:
        case StageKind::kPointwiseConv:
            if (s.weights.cols() != rows)
                throw ValidationError("qnet: stage weight columns do not match input rows");
            d.out_rows = s.weights.rows();
            d.out_len = len / s.pool;
            d.dot_len = s.weights.cols();
            break;
        case StageKind::kTemporalConv:
            if (s.weights.rows() != rows)
                throw ValidationError("qnet: depthwise stage needs one kernel per map");
            d.out_rows = rows;
            d.out_len = len / s.pool;
            d.dot_len = s.weights.cols();
            break;
        case StageKind::kFullyConnected:
            if (s.weights.cols() != rows * len)
                throw ValidationError("qnet: FC weight columns do not match flattened input");
            d.out_rows = s.weights.rows();
            d.out_len = 1;
            d.dot_len = s.weights.cols();
            break;
    }
    if (d.out_len < 1) throw ValidationError("qnet: pooling collapses a stage to zero length");
    return d;
}

}  // namespace

void validate(const QuantNetwork& qnet) {
    // Only the entry dims and the stage chain matter here; the engine also
    // runs reduced toy chains that are not full four-block networks.
    if (qnet.config.n_ch < 1 || qnet.config.n_s < 1 || qnet.config.n_cl < 1)
        throw ValidationError("qnet: entry dimensions must be >= 1");
    if (qnet.stages.empty()) throw ValidationError("qnet: no stages");
    Eigen::Index rows = qnet.config.n_ch, len = qnet.config.n_s;
    for (size_t i = 0; i < qnet.stages.size(); ++i) {
        const QuantStage& s = qnet.stages[i];
        const bool is_fc = s.kind == StageKind::kFullyConnected;
        if (is_fc != (i + 1 == qnet.stages.size()))
            throw ValidationError("qnet: exactly the final stage must be fully connected");
        if (s.pool < 1 || (s.pool & (s.pool - 1)) != 0)
            throw ValidationError("qnet: stage pool must be a positive power of two");
        if (s.weights.shape.size() != 2) throw ValidationError("qnet: stage weights must be rank 2");
        if (int64_t(s.weights.data.size()) != int64_t(s.weights.rows()) * s.weights.cols())
            throw ValidationError("qnet: stage weight data does not match its shape");
        for (int8_t w : s.weights.data)
            if (w < kQuantMin)
                throw ValidationError("qnet: weight outside the symmetric range [-127, 127]");

        StageDims d = stage_dims(s, rows, len);

        // Worst-case conv accumulator and the 64-bit requantization product.
        const int64_t worst_acc = int64_t(127) * 127 * d.dot_len;
        if (is_fc) {
            if (s.bias.size() != size_t(d.out_rows))
                throw ValidationError("qnet: FC bias length mismatch");
            int64_t worst_bias = 0;
            for (int32_t b : s.bias) worst_bias = std::max<int64_t>(worst_bias, std::llabs(b));
            if (worst_acc + worst_bias > INT32_MAX)
                throw ValidationError("qnet: FC accumulator may overflow 32 bits");
        } else {
            if (s.requant.size() != size_t(d.out_rows))
                throw ValidationError("qnet: requant constants must cover every output feature");
            for (const RequantConstants& rc : s.requant) {
                if (rc.shift < 0 || rc.shift > 31)
                    throw ValidationError("qnet: requant shift outside [0, 31]");
                if (rc.mult < 0) throw ValidationError("qnet: requant multiplier must be >= 0");
                const int64_t span = worst_acc + std::llabs(int64_t(rc.bias));
                if (span > INT32_MAX)
                    throw ValidationError("qnet: conv accumulator plus bias may overflow 32 bits");
                if (span > (int64_t(1) << 62) / std::max<int64_t>(rc.mult, 1))
                    throw ValidationError("qnet: requant product may overflow 64 bits");
            }
        }
        rows = d.out_rows;
        len = d.out_len;
    }
    if (rows != qnet.config.n_cl || len != 1)
        throw ValidationError("qnet: stage chain does not end at the class count");
}

namespace {

inline int8_t requantize_counting(int32_t acc, const RequantConstants& c, int64_t& saturations) {
    const int64_t r = rshift_round((int64_t(acc) + c.bias) * c.mult, c.shift);
    if (r < -128 || r > 127) ++saturations;
    return static_cast<int8_t>(std::clamp<int64_t>(r, -128, 127));
}

}  // namespace

namespace {

bool is_full_architecture(const QuantNetwork& q) {
    const ModelConfig& c = q.config;
    return q.stages.size() == 5 && q.stages[0].kind == StageKind::kSpatialConv &&
           q.stages[1].kind == StageKind::kTemporalConv &&
           q.stages[2].kind == StageKind::kTemporalConv &&
           q.stages[3].kind == StageKind::kPointwiseConv &&
           q.stages[4].kind == StageKind::kFullyConnected &&
           q.stages[0].weights.rows() == c.n_k && q.stages[1].weights.cols() == c.n_f &&
           q.stages[2].weights.cols() == c.sep_kernel && c.pool == 8 && c.sep_kernel == 16 &&
           (c.n_s / 8) / 8 >= 1;
}

/// Parameter count at one byte per value. Full four-block networks follow
/// the reference accounting (the float model's parameter count, with the
/// requant constants standing in for the batch-norm blocks); reduced toy
/// chains count their actual stage contents.
int64_t deployed_param_count(const QuantNetwork& q) {
    if (is_full_architecture(q)) return layer_plan(q.config).params_total();
    int64_t n = 0;
    for (const auto& s : q.stages)
        n += s.weights.size() + 3 * int64_t(s.requant.size()) + int64_t(s.bias.size());
    return n;
}

/// For full networks the runtime buffer sizes must equal the execution
/// plan's feature counts; the plan merges the separable pair into one step.
void assert_matches_plan(const QuantNetwork& q, const std::vector<LayerTrace>& layers) {
    if (!is_full_architecture(q)) return;
    const LayerPlan plan = layer_plan(q.config);
    const std::pair<int, int> stage_of_step[4] = {{0, 0}, {1, 1}, {2, 3}, {4, 4}};
    for (int step = 0; step < 4; ++step) {
        const auto [in_stage, out_stage] = stage_of_step[step];
        if (layers[in_stage].input_bytes != plan.steps[step].in_features ||
            layers[out_stage].output_bytes != plan.steps[step].out_features)
            throw ValidationError("engine: runtime buffer sizes diverge from the layer plan");
    }
}

}  // namespace

EngineResult run(const QuantNetwork& qnet, const QuantTensor& x) {
    validate(qnet);
    const ModelConfig& c = qnet.config;
    if (x.shape != std::vector<Eigen::Index>{c.n_ch, c.n_s})
        throw ShapeError("engine: input must be [n_ch x n_s]");
    if (x.scale_exp != qnet.input_scale_exp)
        throw ValidationError("engine: input scale does not match the network input scale");

    EngineResult result;
    ExecutionTrace& trace = result.trace;
    trace.weight_bytes = deployed_param_count(qnet);

    // Two ping-pong activation regions; `in` holds the previous stage output.
    std::vector<int8_t> ping(x.data), pong;
    std::vector<int8_t>* in = &ping;
    std::vector<int8_t>* out = &pong;

    Eigen::Index rows = c.n_ch, len = c.n_s;
    std::vector<int32_t> acc;   // one output map of conv accumulators
    Vec<int32_t> logits;

    for (const QuantStage& s : qnet.stages) {
        StageDims d = stage_dims(s, rows, len);
        out->assign(size_t(d.out_rows) * d.out_len, 0);
        // Feature accounting at one byte per value, the 8-bit deployment
        // convention the estimator uses.
        LayerTrace lt;
        lt.input_bytes = int64_t(rows) * len;
        lt.output_bytes = int64_t(d.out_rows) * d.out_len;
        lt.live_peak_bytes = lt.input_bytes + lt.output_bytes;

        auto in_at = [&](Eigen::Index r, Eigen::Index t) -> int32_t {
            return (*in)[size_t(r) * len + t];
        };

        // Per output map: requantize the conv accumulators to int8, clamp at
        // zero when the stage carries a ReLU, then mean-pool in the int8
        // domain as a window sum plus one shift-only requantization.
        const RequantConstants pool_rc = pool_requant(s.pool);
        std::vector<int8_t> row(len);
        auto finish_row = [&](Eigen::Index map, const RequantConstants& rc) {
            for (Eigen::Index t = 0; t < len; ++t) {
                int8_t q = requantize_counting(acc[t], rc, trace.requant_saturations);
                if (s.relu && q < 0) q = 0;
                row[t] = q;
            }
            for (Eigen::Index w = 0; w < d.out_len; ++w) {
                int32_t sum = 0;
                for (Eigen::Index j = 0; j < s.pool; ++j) sum += row[w * s.pool + j];
                (*out)[size_t(map) * d.out_len + w] = requantize(sum, pool_rc);
            }
        };

        switch (s.kind) {
            case StageKind::kSpatialConv:
            case StageKind::kPointwiseConv: {
                lt.name = s.kind == StageKind::kSpatialConv ? "spatial_conv" : "pointwise_conv";
                acc.assign(len, 0);
                for (Eigen::Index k = 0; k < d.out_rows; ++k) {
                    for (Eigen::Index t = 0; t < len; ++t) {
                        int32_t a = 0;
                        for (Eigen::Index r = 0; r < rows; ++r)
                            a += int32_t(s.weights.at(k, r)) * in_at(r, t);
                        acc[t] = a;
                    }
                    finish_row(k, s.requant[k]);
                }
                lt.maccs = int64_t(rows) * len * d.out_rows;
                break;
            }
            case StageKind::kTemporalConv: {
                lt.name = "temporal_conv";
                // Weights are stored reversed; true-convolution indexing
                // reproduces the cross-correlation the float layer computes.
                const Eigen::Index klen = s.weights.cols();
                const Eigen::Index pad = (klen - 1) / 2;
                acc.assign(len, 0);
                for (Eigen::Index m = 0; m < rows; ++m) {
                    for (Eigen::Index t = 0; t < len; ++t) {
                        int32_t a = 0;
                        for (Eigen::Index j = 0; j < klen; ++j) {
                            const Eigen::Index src = t + (klen - 1 - j) - pad;
                            if (src >= 0 && src < len)
                                a += int32_t(s.weights.at(m, j)) * in_at(m, src);
                        }
                        acc[t] = a;
                    }
                    finish_row(m, s.requant[m]);
                }
                lt.maccs = int64_t(klen) * len * rows;
                break;
            }
            case StageKind::kFullyConnected: {
                lt.name = "fully_connected";
                logits.resize(d.out_rows);
                for (Eigen::Index o = 0; o < d.out_rows; ++o) {
                    int32_t a = s.bias[o];
                    for (Eigen::Index i = 0; i < d.dot_len; ++i)
                        a += int32_t(s.weights.at(o, i)) * int32_t((*in)[i]);
                    logits(o) = a;
                }
                lt.maccs = int64_t(d.dot_len) * d.out_rows;
                break;
            }
        }

        trace.layers.push_back(lt);
        trace.macc_total += lt.maccs;
        trace.peak_live_bytes = std::max(trace.peak_live_bytes, lt.live_peak_bytes);
        std::swap(in, out);
        rows = d.out_rows;
        len = d.out_len;
    }
    assert_matches_plan(qnet, trace.layers);

    result.logits = std::move(logits);
    return result;
}

int64_t project_cycles(const ExecutionTrace& trace, const SimdModel& model) {
    if (model.lanes < 1 || model.cores < 1 || model.overhead_factor < 1.0)
        throw ValidationError("simd model: lanes/cores >= 1 and overhead >= 1 required");
    const int64_t slots = int64_t(model.lanes) * model.cores;
    const int64_t base = (trace.macc_total + slots - 1) / slots;
    return static_cast<int64_t>(std::ceil(double(base) * model.overhead_factor));
}

std::string ExecutionTrace::text() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %12s %10s %10s %12s\n", "layer", "macc", "in_B",
                  "out_B", "live_peak_B");
    os << line;
    for (const auto& l : layers) {
        std::snprintf(line, sizeof line, "%-18s %12lld %10lld %10lld %12lld\n", l.name.c_str(),
                      (long long)l.maccs, (long long)l.input_bytes, (long long)l.output_bytes,
                      (long long)l.live_peak_bytes);
        os << line;
    }
    std::snprintf(line, sizeof line,
                  "totals: macc %lld | weights %lld B | peak live %lld B | peak memory %lld B\n",
                  (long long)macc_total, (long long)weight_bytes, (long long)peak_live_bytes,
                  (long long)peak_memory_bytes());
    os << line;
    return os.str();
}

std::string ExecutionTrace::kv() const {
    std::ostringstream os;
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string key = "layer" + std::to_string(i + 1);
        os << key << ".name=" << l.name << "\n";
        os << key << ".macc=" << l.maccs << "\n";
        os << key << ".input_bytes=" << l.input_bytes << "\n";
        os << key << ".output_bytes=" << l.output_bytes << "\n";
        os << key << ".live_peak_bytes=" << l.live_peak_bytes << "\n";
    }
    os << "macc_total=" << macc_total << "\n";
    os << "weight_bytes=" << weight_bytes << "\n";
    os << "peak_live_bytes=" << peak_live_bytes << "\n";
    os << "peak_memory_bytes=" << peak_memory_bytes() << "\n";
    os << "requant_saturations=" << requant_saturations << "\n";
    return os.str();
}

}  // namespace mibminet
