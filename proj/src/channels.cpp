#include "mibminet/channels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace mibminet {

namespace {

ChannelRanking rank_from_norms(const VecD& norms, const std::vector<std::string>& names) {
    const int n_ch = static_cast<int>(norms.size());
    if (!names.empty() && static_cast<int>(names.size()) != n_ch)
        throw ShapeError("rank_channels: channel name count mismatch");
    ChannelRanking r;
    r.entries.resize(n_ch);
    for (int i = 0; i < n_ch; ++i) {
        r.entries[i].index = i;
        r.entries[i].norm = norms(i);
        r.entries[i].name = names.empty() ? "ch" + std::to_string(i) : names[i];
    }
    std::stable_sort(r.entries.begin(), r.entries.end(),
                     [](const RankedChannel& a, const RankedChannel& b) {
                         if (a.norm != b.norm) return a.norm > b.norm;
                         return a.index < b.index;
                     });
    return r;
}

}  // namespace

ChannelRanking rank_channels(const Mat<float>& w, const std::vector<std::string>& names) {
    if (w.size() == 0) throw ValidationError("rank_channels: empty spatial weights");
    VecD norms = w.cast<double>().colwise().norm();
    return rank_from_norms(norms, names);
}

ChannelRanking rank_channels_averaged(const std::vector<Mat<float>>& ws,
                                      const std::vector<std::string>& names) {
    if (ws.empty()) throw ValidationError("rank_channels_averaged: no weight sets");
    VecD norms = VecD::Zero(ws.front().cols());
    for (const auto& w : ws) {
        if (w.cols() != norms.size())
            throw ShapeError("rank_channels_averaged: channel count mismatch");
        norms += w.cast<double>().colwise().norm();
    }
    norms /= double(ws.size());
    return rank_from_norms(norms, names);
}

std::vector<int> select_top(const ChannelRanking& ranking, int n_bar) {
    if (n_bar < 1 || n_bar > static_cast<int>(ranking.entries.size()))
        throw ValidationError("select_top: n_bar must be in [1, n_ch]");
    std::vector<int> out(n_bar);
    for (int i = 0; i < n_bar; ++i) out[i] = ranking.entries[i].index;
    return out;
}

std::string ChannelRanking::kv() const {
    std::ostringstream os;
    for (size_t i = 0; i < entries.size(); ++i) {
        const std::string key = "rank" + std::to_string(i);
        os << key << ".index=" << entries[i].index << "\n";
        os << key << ".name=" << entries[i].name << "\n";
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.9g", entries[i].norm);
        os << key << ".norm=" << buf << "\n";
    }
    return os.str();
}

namespace {

std::string normalize_name(const std::string& s) {
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

// Headset-style subsets over the sensorimotor cortex and its frontal /
// parietal neighbors, plus the distributed 10-20 montage (A1/A2 excluded).
const std::map<std::string, std::vector<std::string>>& preset_table() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"central-2", {"C3", "C4"}},
        {"central-3", {"C3", "CZ", "C4"}},
        {"central-5", {"C5", "C3", "CZ", "C4", "C6"}},
        {"central-7", {"C5", "C3", "C1", "CZ", "C2", "C4", "C6"}},
        {"central-9", {"T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8"}},
        {"central-11", {"T9", "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8", "T10"}},
        {"center+frontal-4", {"C3", "C4", "FC3", "FC4"}},
        {"center+frontal-6", {"C3", "CZ", "C4", "FC3", "FCZ", "FC4"}},
        {"center+frontal-10",
         {"C5", "C3", "CZ", "C4", "C6", "FC5", "FC3", "FCZ", "FC4", "FC6"}},
        {"center+frontal-14",
         {"C5", "C3", "C1", "CZ", "C2", "C4", "C6", "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4",
          "FC6"}},
        {"center+frontal-18",
         {"T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8", "FT7", "FC5", "FC3", "FC1",
          "FCZ", "FC2", "FC4", "FC6", "FT8"}},
        {"center+frontal-20",
         {"T9", "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8", "T10", "FT7", "FC5", "FC3",
          "FC1", "FCZ", "FC2", "FC4", "FC6", "FT8"}},
        {"center+parietal-4", {"C3", "C4", "CP3", "CP4"}},
        {"center+parietal-6", {"C3", "CZ", "C4", "CP3", "CPZ", "CP4"}},
        {"center+parietal-10",
         {"C5", "C3", "CZ", "C4", "C6", "CP5", "CP3", "CPZ", "CP4", "CP6"}},
        {"center+parietal-14",
         {"C5", "C3", "C1", "CZ", "C2", "C4", "C6", "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4",
          "CP6"}},
        {"center+parietal-18",
         {"T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8", "TP7", "CP5", "CP3", "CP1",
          "CPZ", "CP2", "CP4", "CP6", "TP8"}},
        {"center+parietal-20",
         {"T9", "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8", "T10", "TP7", "CP5", "CP3",
          "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8"}},
        // International 10-20 system without the ear references. The 8- and
        // 38-electrode distributed layouts are figure-specific and load from
        // user config instead.
        {"distributed-19",
         {"FP1", "FP2", "F7", "F3", "FZ", "F4", "F8", "T7", "C3", "CZ", "C4", "T8", "P7", "P3",
          "PZ", "P4", "P8", "O1", "O2"}},
    };
    return table;
}

}  // namespace

ElectrodePreset preset(const std::string& name) {
    const auto& table = preset_table();
    auto it = table.find(normalize_name(name));
    if (it == table.end()) throw ValidationError("unknown electrode preset '" + name + "'");
    return {it->first, it->second};
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : preset_table()) names.push_back(k);
    return names;
}

ReduceResult reduce_and_retrain(const TrialDataset& train_data, const TrialDataset& eval_data,
                                int n_bar, const ModelConfig& base_config,
                                const TrainHyper& hyper) {
    if (n_bar < 1 || n_bar > base_config.n_ch)
        throw ValidationError("reduce_and_retrain: n_bar out of range");

    ReduceResult out;
    Network full = build(base_config, hyper.seed);
    TrainResult full_run = train(std::move(full), train_data, &eval_data, hyper);
    out.full_net = std::move(full_run.net);
    out.full_metrics = full_run.final_val;

    out.ranking = rank_channels(out.full_net.spatial.weights, train_data.channel_names);
    out.kept_channels = select_top(out.ranking, n_bar);
    std::sort(out.kept_channels.begin(), out.kept_channels.end());

    TrialDataset reduced_train = select_channels(train_data, out.kept_channels);
    TrialDataset reduced_eval = select_channels(eval_data, out.kept_channels);

    out.reduced_config = base_config;
    out.reduced_config.n_ch = n_bar;
    TrainHyper reduced_hyper = hyper;
    reduced_hyper.seed = hyper.seed ^ 0x9e3779b97f4a7c15ull;  // fresh initialization
    Network reduced = build(out.reduced_config, reduced_hyper.seed);
    TrainResult reduced_run = train(std::move(reduced), reduced_train, &reduced_eval,
                                    reduced_hyper);
    out.reduced_net = std::move(reduced_run.net);
    out.reduced_metrics = reduced_run.final_val;
    out.accuracy_delta = out.reduced_metrics.accuracy - out.full_metrics.accuracy;
    return out;
}

}  // namespace mibminet
