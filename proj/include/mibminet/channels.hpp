#pragma once

#include "mibminet/dataset.hpp"
#include "mibminet/model.hpp"
#include "mibminet/trainer.hpp"

#include <string>
#include <vector>

namespace mibminet {

struct RankedChannel {
    int index = 0;
    std::string name;
    double norm = 0.0;
};

/// All input channels ordered by descending spatial-filter l2 norm; ties
/// break by ascending channel index.
struct ChannelRanking {
    std::vector<RankedChannel> entries;

    std::string kv() const;
};

/// norm(i) = sqrt(sum_k W_S[k][i]^2) over the spatial conv weights
/// [n_filters x n_channels].
ChannelRanking rank_channels(const Mat<float>& spatial_weights,
                             const std::vector<std::string>& channel_names = {});

/// Ranking from column-norms averaged over several checkpoints' spatial
/// weights (they must share the channel count).
ChannelRanking rank_channels_averaged(const std::vector<Mat<float>>& spatial_weights,
                                      const std::vector<std::string>& channel_names = {});

/// First n_bar ranked channel indices.
std::vector<int> select_top(const ChannelRanking& ranking, int n_bar);

struct ElectrodePreset {
    std::string name;
    std::vector<std::string> electrodes;
};

/// Named electrode subsets over the sensorimotor and neighboring areas
/// (central / center+frontal / center+parietal rows) plus the distributed
/// 19-electrode 10-20 montage. Lookup is case-insensitive.
ElectrodePreset preset(const std::string& name);
std::vector<std::string> preset_names();

struct ReduceResult {
    ChannelRanking ranking;
    std::vector<int> kept_channels;  // ascending dataset order
    ModelConfig reduced_config;
    Network full_net;
    Network reduced_net;
    Metrics full_metrics;
    Metrics reduced_metrics;
    double accuracy_delta = 0.0;  // reduced minus full, on the evaluation set
};

/// Trains on all channels, ranks them from the spatial filters, keeps the
/// n_bar strongest, and retrains a reduced model from scratch with a
/// re-derived seed.
ReduceResult reduce_and_retrain(const TrialDataset& train_data, const TrialDataset& eval_data,
                                int n_bar, const ModelConfig& base_config,
                                const TrainHyper& hyper);

}  // namespace mibminet
