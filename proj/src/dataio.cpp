#include "mibminet/dataio.hpp"

#include "mibminet/engine.hpp"
#include "mibminet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace mibminet {

// ---------------------------------------------------------------------------
// Dataset helpers

void TrialDataset::validate() const {
    if (n_ch < 1 || n_samples < 1 || n_classes < 1)
        throw ValidationError("dataset: dimensions must be >= 1");
    if (channel_names.size() != size_t(n_ch))
        throw ValidationError("dataset: channel name count must equal n_ch");
    if (labels.size() != trials.size())
        throw ValidationError("dataset: one label per trial required");
    for (uint16_t l : labels)
        if (l >= n_classes) throw ValidationError("dataset: label outside [0, n_classes)");
    for (const auto& t : trials) {
        if (t.rows() != n_ch || t.cols() != n_samples)
            throw ValidationError("dataset: trial shape mismatch");
        if (!t.allFinite()) throw ValidationError("dataset: non-finite sample");
    }
}

TrialDataset select_channels(const TrialDataset& d, const std::vector<int>& indices) {
    d.validate();
    if (indices.empty()) throw ValidationError("select_channels: empty channel list");
    TrialDataset out = d;
    out.n_ch = static_cast<int>(indices.size());
    out.channel_names.clear();
    for (int i : indices) {
        if (i < 0 || i >= d.n_ch) throw ValidationError("select_channels: index out of range");
        out.channel_names.push_back(d.channel_names[i]);
    }
    for (size_t t = 0; t < d.trials.size(); ++t) {
        MatF m(out.n_ch, d.n_samples);
        for (size_t r = 0; r < indices.size(); ++r)
            m.row(static_cast<Eigen::Index>(r)) = d.trials[t].row(indices[r]);
        out.trials[t] = std::move(m);
    }
    return out;
}

std::pair<TrialDataset, TrialDataset> split_trials(const TrialDataset& d, double eval_fraction,
                                                   uint64_t seed) {
    d.validate();
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw ValidationError("split_trials: fraction must be in (0, 1)");
    TrialDataset fit = d, eval = d;
    fit.trials.clear();
    fit.labels.clear();
    eval.trials.clear();
    eval.labels.clear();
    Rng rng(seed);
    for (int cls = 0; cls < d.n_classes; ++cls) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < d.trials.size(); ++i)
            if (d.labels[i] == cls) idx.push_back(i);
        for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        const size_t n_eval = static_cast<size_t>(std::llround(eval_fraction * double(idx.size())));
        for (size_t i = 0; i < idx.size(); ++i) {
            TrialDataset& dst = i < n_eval ? eval : fit;
            dst.trials.push_back(d.trials[idx[i]]);
            dst.labels.push_back(d.labels[idx[i]]);
        }
    }
    return {std::move(fit), std::move(eval)};
}

// ---------------------------------------------------------------------------
// Little-endian primitives

namespace {

class Writer {
public:
    explicit Writer(const std::string& path)
        : path_(path), tmp_(path + ".tmp"), os_(tmp_, std::ios::binary) {
        if (!os_) throw IoError("cannot open for writing: " + tmp_);
    }
    ~Writer() {
        if (!committed_) {
            os_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void bytes(const void* p, size_t n) { os_.write(static_cast<const char*>(p), n); }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) { le(v); }
    void u32(uint32_t v) { le(v); }
    void u64(uint64_t v) { le(v); }
    void i32(int32_t v) { le(static_cast<uint32_t>(v)); }
    void f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        le(u);
    }
    void str(const std::string& s) {
        if (s.size() > UINT16_MAX) throw IoError("string too long for format");
        u16(static_cast<uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void mat(const MatF& m) {
        u32(static_cast<uint32_t>(m.rows()));
        u32(static_cast<uint32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) f32(m.data()[i]);
    }
    void vec(const VecF& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f32(v(i));
    }

    void commit() {
        os_.flush();
        if (!os_) throw IoError("write failed: " + tmp_);
        os_.close();
        std::error_code ec;
        std::filesystem::rename(tmp_, path_, ec);
        if (ec) throw IoError("cannot move " + tmp_ + " to " + path_);
        committed_ = true;
    }

private:
    template <class U>
    void le(U v) {
        unsigned char buf[sizeof(U)];
        for (size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, sizeof(U));
    }

    std::string path_, tmp_;
    std::ofstream os_;
    bool committed_ = false;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), is_(path, std::ios::binary) {
        if (!is_) throw IoError("cannot open: " + path);
    }

    void bytes(void* p, size_t n) {
        is_.read(static_cast<char*>(p), n);
        if (static_cast<size_t>(is_.gcount()) != n)
            throw IoError("truncated file: " + path_);
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint16_t u16() { return le<uint16_t>(); }
    uint32_t u32() { return le<uint32_t>(); }
    uint64_t u64() { return le<uint64_t>(); }
    int32_t i32() { return static_cast<int32_t>(le<uint32_t>()); }
    float f32() {
        uint32_t u = le<uint32_t>();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    std::string str() {
        std::string s(u16(), '\0');
        bytes(s.data(), s.size());
        return s;
    }
    MatF mat() {
        const uint32_t r = u32(), c = u32();
        if (uint64_t(r) * c > (1u << 28)) throw IoError("matrix too large: " + path_);
        MatF m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32();
        return m;
    }
    VecF vec() {
        const uint32_t n = u32();
        if (n > (1u << 28)) throw IoError("vector too large: " + path_);
        VecF v(n);
        for (uint32_t i = 0; i < n; ++i) v(i) = f32();
        return v;
    }
    void magic(const char* expect) {
        char buf[4];
        bytes(buf, 4);
        if (std::memcmp(buf, expect, 4) != 0)
            throw IoError(std::string("bad magic, expected ") + expect + ": " + path_);
    }
    void expect_eof() {
        is_.peek();
        if (!is_.eof()) throw IoError("trailing bytes: " + path_);
    }

private:
    template <class U>
    U le() {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U v = 0;
        for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
        return v;
    }

    std::string path_;
    std::ifstream is_;
};

constexpr uint16_t kTrialsVersion = 1;
constexpr uint16_t kCheckpointVersion = 1;
constexpr uint16_t kQnetVersion = 1;

void write_config(Writer& w, const ModelConfig& c) {
    w.i32(c.n_ch);
    w.i32(c.n_s);
    w.i32(c.n_k);
    w.i32(c.n_f);
    w.i32(c.n_cl);
    w.i32(c.pool);
    w.i32(c.sep_kernel);
}

ModelConfig read_config(Reader& r) {
    ModelConfig c;
    c.n_ch = r.i32();
    c.n_s = r.i32();
    c.n_k = r.i32();
    c.n_f = r.i32();
    c.n_cl = r.i32();
    c.pool = r.i32();
    c.sep_kernel = r.i32();
    c.validate();
    return c;
}

void write_bn(Writer& w, const BatchNormParams<float>& p) {
    w.vec(p.gamma);
    w.vec(p.beta);
    w.vec(p.running_mean);
    w.vec(p.running_var);
    w.f32(p.epsilon);
}

BatchNormParams<float> read_bn(Reader& r) {
    BatchNormParams<float> p;
    p.gamma = r.vec();
    p.beta = r.vec();
    p.running_mean = r.vec();
    p.running_var = r.vec();
    p.epsilon = r.f32();
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// MIBT trials

void write_trials(const std::string& path, const TrialDataset& d) {
    d.validate();
    Writer w(path);
    w.bytes("MIBT", 4);
    w.u16(kTrialsVersion);
    w.u32(static_cast<uint32_t>(d.n_trials()));
    w.u16(static_cast<uint16_t>(d.n_ch));
    w.u32(static_cast<uint32_t>(d.n_samples));
    w.f32(d.sample_rate_hz);
    w.u16(static_cast<uint16_t>(d.n_classes));
    for (const auto& name : d.channel_names) w.str(name);
    for (uint16_t l : d.labels) w.u16(l);
    for (const auto& t : d.trials)
        for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
    w.commit();
}

TrialDataset read_trials(const std::string& path) {
    Reader r(path);
    r.magic("MIBT");
    const uint16_t version = r.u16();
    if (version != kTrialsVersion)
        throw IoError("unsupported MIBT version " + std::to_string(version) + ": " + path);
    TrialDataset d;
    const uint32_t n_trials = r.u32();
    d.n_ch = r.u16();
    d.n_samples = static_cast<int>(r.u32());
    d.sample_rate_hz = r.f32();
    d.n_classes = r.u16();
    if (d.n_ch < 1 || d.n_samples < 1 || d.n_classes < 1)
        throw IoError("MIBT header with zero dimension: " + path);
    for (int i = 0; i < d.n_ch; ++i) d.channel_names.push_back(r.str());
    d.labels.resize(n_trials);
    for (uint32_t i = 0; i < n_trials; ++i) d.labels[i] = r.u16();
    d.trials.resize(n_trials);
    for (uint32_t i = 0; i < n_trials; ++i) {
        MatF m(d.n_ch, d.n_samples);
        for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = r.f32();
        d.trials[i] = std::move(m);
    }
    r.expect_eof();
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Synthetic EEG

void SynthSpec::validate() const {
    if (n_ch < 1 || n_samples < 1) throw ValidationError("synth spec: dimensions must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ValidationError("synth spec: sample rate must be > 0");
    if (classes.empty()) throw ValidationError("synth spec: at least one class required");
    if (noise_sigma < 0.0) throw ValidationError("synth spec: noise sigma must be >= 0");
    for (const auto& cs : classes) {
        if (cs.channels.empty())
            throw ValidationError("synth spec: class without informative channels");
        for (int ch : cs.channels)
            if (ch < 0 || ch >= n_ch)
                throw ValidationError("synth spec: informative channel out of range");
    }
    if (distractor_amplitude > 0.0 && distractor_bands.empty())
        throw ValidationError("synth spec: distractors enabled without bands");
    if (distractor_amplitude < 0.0)
        throw ValidationError("synth spec: distractor amplitude must be >= 0");
}

SynthSpec default_synth_spec() {
    SynthSpec spec;
    spec.classes = {{{2}, 10.0, 2.0}, {{5}, 22.0, 2.0}};
    return spec;
}

SynthSpec planted_synth_spec() {
    SynthSpec spec;
    spec.classes = {{{2, 5}, 10.0, 2.0}, {{2, 5}, 22.0, 2.0}};
    spec.distractor_amplitude = 2.0;
    spec.distractor_bands = {10.0, 22.0};
    return spec;
}

namespace {

/// Random orthonormal matrix via Gram-Schmidt on a Gaussian draw.
MatD random_orthonormal(int n, Rng& rng) {
    MatD q(n, n);
    for (int c = 0; c < n; ++c) {
        VecD v(n);
        for (int r = 0; r < n; ++r) v(r) = rng.normal();
        for (int p = 0; p < c; ++p) v -= q.col(p).dot(v) * q.col(p);
        const double nrm = v.norm();
        if (nrm < 1e-9) return random_orthonormal(n, rng);  // degenerate draw, retry
        q.col(c) = v / nrm;
    }
    return q;
}

}  // namespace

TrialDataset synth(const SynthSpec& spec, int n_per_class, uint64_t seed) {
    spec.validate();
    if (n_per_class < 1) throw ValidationError("synth: n_per_class must be >= 1");

    Rng mix_rng(spec.mixing_seed);
    std::vector<MatD> mixers;
    for (const auto& cs : spec.classes)
        mixers.push_back(random_orthonormal(static_cast<int>(cs.channels.size()), mix_rng));

    TrialDataset d;
    d.n_ch = spec.n_ch;
    d.n_samples = spec.n_samples;
    d.n_classes = static_cast<int>(spec.classes.size());
    d.sample_rate_hz = static_cast<float>(spec.sample_rate_hz);
    for (int i = 0; i < spec.n_ch; ++i) d.channel_names.push_back("ch" + std::to_string(i));

    std::vector<bool> informative(spec.n_ch, false);
    for (const auto& cs : spec.classes)
        for (int ch : cs.channels) informative[ch] = true;

    Rng rng(seed);
    const double dt = 1.0 / spec.sample_rate_hz;
    const double two_pi = 6.283185307179586;
    auto envelope = [&](int t) {
        const double u = std::sin(M_PI * double(t) /
                                  double(spec.n_samples - 1 + (spec.n_samples == 1)));
        return u * u;
    };
    for (int cls = 0; cls < d.n_classes; ++cls) {
        const ClassSignal& cs = spec.classes[cls];
        const int m = static_cast<int>(cs.channels.size());
        for (int trial = 0; trial < n_per_class; ++trial) {
            MatF x(spec.n_ch, spec.n_samples);
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x.data()[i] = static_cast<float>(spec.noise_sigma * rng.normal());

            // one oscillating source per informative channel, then mix
            MatD sources(m, spec.n_samples);
            for (int s = 0; s < m; ++s) {
                const double phase = rng.uniform(0.0, two_pi);
                for (int t = 0; t < spec.n_samples; ++t)
                    sources(s, t) = cs.amplitude * envelope(t) *
                                    std::sin(two_pi * cs.center_hz * t * dt + phase);
            }
            MatD mixed = mixers[cls] * sources;
            for (int s = 0; s < m; ++s)
                for (int t = 0; t < spec.n_samples; ++t)
                    x(cs.channels[s], t) += static_cast<float>(mixed(s, t));

            // class-independent confusers on the remaining channels
            if (spec.distractor_amplitude > 0.0) {
                for (int ch = 0; ch < spec.n_ch; ++ch) {
                    if (informative[ch]) continue;
                    const double hz =
                        spec.distractor_bands[rng.below(spec.distractor_bands.size())];
                    const double phase = rng.uniform(0.0, two_pi);
                    for (int t = 0; t < spec.n_samples; ++t)
                        x(ch, t) += static_cast<float>(spec.distractor_amplitude * envelope(t) *
                                                       std::sin(two_pi * hz * t * dt + phase));
                }
            }

            d.trials.push_back(std::move(x));
            d.labels.push_back(static_cast<uint16_t>(cls));
        }
    }
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w(path);
    w.bytes("MIBC", 4);
    w.u16(kCheckpointVersion);
    write_config(w, ckpt.net.config);
    w.u64(ckpt.seed);
    w.u32(ckpt.epochs);
    w.u64(ckpt.hyper_digest);
    w.mat(ckpt.net.spatial.weights);
    write_bn(w, ckpt.net.bn1);
    w.mat(ckpt.net.temporal.weights);
    write_bn(w, ckpt.net.bn2);
    w.mat(ckpt.net.sep_depthwise.weights);
    w.mat(ckpt.net.pointwise.weights);
    write_bn(w, ckpt.net.bn3);
    w.mat(ckpt.net.fc.weights);
    w.vec(ckpt.net.fc.bias);
    w.commit();
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    r.magic("MIBC");
    const uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    Checkpoint c;
    c.net.config = read_config(r);
    c.seed = r.u64();
    c.epochs = r.u32();
    c.hyper_digest = r.u64();
    c.net.spatial.weights = r.mat();
    c.net.bn1 = read_bn(r);
    c.net.temporal.weights = r.mat();
    c.net.bn2 = read_bn(r);
    c.net.sep_depthwise.weights = r.mat();
    c.net.pointwise.weights = r.mat();
    c.net.bn3 = read_bn(r);
    c.net.fc.weights = r.mat();
    c.net.fc.bias = r.vec();
    r.expect_eof();

    const ModelConfig& cfg = c.net.config;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) throw IoError(std::string("checkpoint shape mismatch: ") + what + ": " + path);
    };
    expect(c.net.spatial.weights.rows() == cfg.n_k && c.net.spatial.weights.cols() == cfg.n_ch,
           "spatial");
    expect(c.net.temporal.weights.rows() == cfg.n_k && c.net.temporal.weights.cols() == cfg.n_f,
           "temporal");
    expect(c.net.sep_depthwise.weights.rows() == cfg.n_k &&
               c.net.sep_depthwise.weights.cols() == cfg.sep_kernel,
           "sep_depthwise");
    expect(c.net.pointwise.weights.rows() == cfg.n_k && c.net.pointwise.weights.cols() == cfg.n_k,
           "pointwise");
    expect(c.net.fc.weights.rows() == cfg.n_cl && c.net.fc.weights.cols() == cfg.fc_inputs(),
           "fc");
    expect(c.net.fc.bias.size() == cfg.n_cl, "fc bias");
    for (const auto* bn : {&c.net.bn1, &c.net.bn2, &c.net.bn3}) {
        expect(bn->gamma.size() == cfg.n_k && bn->beta.size() == cfg.n_k &&
                   bn->running_mean.size() == cfg.n_k && bn->running_var.size() == cfg.n_k,
               "batchnorm");
        expect(bn->running_var.minCoeff() >= 0.0f, "negative running variance");
    }
    auto finite = [&](const MatF& m) { expect(m.allFinite(), "non-finite parameter"); };
    finite(c.net.spatial.weights);
    finite(c.net.temporal.weights);
    finite(c.net.sep_depthwise.weights);
    finite(c.net.pointwise.weights);
    finite(c.net.fc.weights);
    return c;
}

// ---------------------------------------------------------------------------
// Quantized networks

void save_qnet(const std::string& path, const QuantNetwork& qnet) {
    validate(qnet);
    Writer w(path);
    w.bytes("MIBQ", 4);
    w.u16(kQnetVersion);
    write_config(w, qnet.config);
    w.i32(qnet.input_scale_exp);
    w.i32(qnet.logit_scale_exp);
    w.u16(static_cast<uint16_t>(qnet.stages.size()));
    for (const auto& s : qnet.stages) {
        w.u8(static_cast<uint8_t>(s.kind));
        w.u8(s.relu ? 1 : 0);
        w.i32(s.pool);
        w.i32(s.in_scale_exp);
        w.i32(s.out_scale_exp);
        w.u32(static_cast<uint32_t>(s.weights.rows()));
        w.u32(static_cast<uint32_t>(s.weights.cols()));
        w.i32(s.weights.scale_exp);
        w.bytes(s.weights.data.data(), s.weights.data.size());
        w.u32(static_cast<uint32_t>(s.requant.size()));
        for (const auto& rc : s.requant) {
            w.i32(rc.mult);
            w.i32(rc.shift);
            w.i32(rc.bias);
        }
        w.u32(static_cast<uint32_t>(s.bias.size()));
        for (int32_t b : s.bias) w.i32(b);
    }
    w.commit();
}

QuantNetwork load_qnet(const std::string& path) {
    Reader r(path);
    r.magic("MIBQ");
    const uint16_t version = r.u16();
    if (version != kQnetVersion)
        throw IoError("unsupported qnet version " + std::to_string(version) + ": " + path);
    QuantNetwork q;
    q.config = read_config(r);
    q.input_scale_exp = r.i32();
    q.logit_scale_exp = r.i32();
    const uint16_t n_stages = r.u16();
    for (int i = 0; i < n_stages; ++i) {
        QuantStage s;
        const uint8_t kind = r.u8();
        if (kind > static_cast<uint8_t>(StageKind::kFullyConnected))
            throw IoError("qnet stage with unknown kind: " + path);
        s.kind = static_cast<StageKind>(kind);
        s.relu = r.u8() != 0;
        s.pool = r.i32();
        s.in_scale_exp = r.i32();
        s.out_scale_exp = r.i32();
        const uint32_t rows = r.u32(), cols = r.u32();
        if (uint64_t(rows) * cols > (1u << 28)) throw IoError("qnet weights too large: " + path);
        s.weights.shape = {Eigen::Index(rows), Eigen::Index(cols)};
        s.weights.scale_exp = r.i32();
        s.weights.data.resize(size_t(rows) * cols);
        r.bytes(s.weights.data.data(), s.weights.data.size());
        const uint32_t n_rq = r.u32();
        if (n_rq > (1u << 24)) throw IoError("qnet requant table too large: " + path);
        s.requant.resize(n_rq);
        for (auto& rc : s.requant) {
            rc.mult = r.i32();
            rc.shift = r.i32();
            rc.bias = r.i32();
        }
        const uint32_t n_bias = r.u32();
        if (n_bias > (1u << 24)) throw IoError("qnet bias table too large: " + path);
        s.bias.resize(n_bias);
        for (auto& b : s.bias) b = r.i32();
        q.stages.push_back(std::move(s));
    }
    r.expect_eof();
    validate(q);
    return q;
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp);
        os << content;
        os.flush();
        if (!os) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path);
}

}  // namespace mibminet
