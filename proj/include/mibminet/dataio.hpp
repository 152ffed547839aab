#pragma once

#include "mibminet/dataset.hpp"
#include "mibminet/model.hpp"
#include "mibminet/quantizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mibminet {

// ---------------------------------------------------------------------------
// MIBT trial container. Little-endian layout:
//   magic "MIBT", version u16, n_trials u32, n_ch u16, n_samples u32,
//   sample_rate f32, n_classes u16, channel names (u16 length + ASCII each),
//   labels u16[n_trials], data f32[trial][channel][sample].

void write_trials(const std::string& path, const TrialDataset& d);
TrialDataset read_trials(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic EEG. Each class plants sinusoid bursts with a class-specific
// band on its informative channels, mixed by a random orthonormal matrix
// restricted to those channels, plus white noise everywhere.

struct ClassSignal {
    std::vector<int> channels;
    double center_hz = 10.0;
    double amplitude = 2.0;
};

struct SynthSpec {
    int n_ch = 8;
    int n_samples = 256;
    double sample_rate_hz = 128.0;
    std::vector<ClassSignal> classes;
    double noise_sigma = 1.0;
    uint64_t mixing_seed = 7;
    // Class-independent confuser oscillations on the non-informative
    // channels, drawn per trial from `distractor_bands`. They force a
    // classifier to actually suppress those channels instead of averaging
    // over them. Off by default.
    double distractor_amplitude = 0.0;
    std::vector<double> distractor_bands;

    void validate() const;
};

/// Two classes, signal confined to channels 2 and 5 at distinct bands,
/// amplitude twice the noise level.
SynthSpec default_synth_spec();

/// Channel-recovery task: both classes oscillate on channels 2 and 5
/// (frequency codes the class) while every other channel carries equally
/// strong class-independent oscillations in the same bands. Only
/// suppressing the confuser channels solves the task, so the trained
/// spatial-filter norms concentrate on the planted channels.
SynthSpec planted_synth_spec();

TrialDataset synth(const SynthSpec& spec, int n_per_class, uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints ("MIBC") and quantized networks ("MIBQ"), versioned binary,
// byte-exact round trips. Loading validates shapes, finiteness, and the
// integer invariants.

struct Checkpoint {
    Network net;
    uint64_t seed = 0;
    uint32_t epochs = 0;
    uint64_t hyper_digest = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

void save_qnet(const std::string& path, const QuantNetwork& qnet);
QuantNetwork load_qnet(const std::string& path);

/// Writes via a temp file and renames, so failures leave no partial output.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace mibminet
