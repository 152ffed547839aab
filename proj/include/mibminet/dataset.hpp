#pragma once

#include "mibminet/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mibminet {

/// Labeled EEG trials, one [n_ch x n_samples] matrix per trial.
struct TrialDataset {
    int n_ch = 0;
    int n_samples = 0;
    int n_classes = 0;
    float sample_rate_hz = 0.0f;
    std::vector<std::string> channel_names;
    std::vector<uint16_t> labels;
    Batch<float> trials;

    size_t n_trials() const { return trials.size(); }
    void validate() const;
};

/// Keeps only the given channels, in the order given.
TrialDataset select_channels(const TrialDataset& d, const std::vector<int>& indices);

/// Deterministic stratified split; the second part holds ~`eval_fraction` of
/// each class.
std::pair<TrialDataset, TrialDataset> split_trials(const TrialDataset& d, double eval_fraction,
                                                   uint64_t seed);

}  // namespace mibminet
