#pragma once

#include "mibminet/dataset.hpp"
#include "mibminet/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mibminet {

/// Quantization-aware training phases: full precision until t_a, activation
/// quantization (straight-through) from t_a, progressive random-partition
/// weight freezing from t_w in steps of `rpr_step` epochs, fully quantized
/// weights at t_end.
struct QatSchedule {
    int t_a = 0;
    int t_w = 0;
    int t_end = 0;
    int rpr_step = 10;
    bool monotone_partitions = false;  // grow partitions instead of re-sampling

    void validate() const;
};

/// Fraction of weights frozen at quantized values at the given epoch.
double rpr_schedule(int epoch, const QatSchedule& q);

struct TrainHyper {
    int epochs = 100;
    int batch_size = 32;
    std::vector<std::pair<int, float>> lr_schedule = {{0, 1e-3f}};
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-7f;
    uint64_t seed = 1;
    std::optional<QatSchedule> qat;
    int workers = 1;
    float bn_momentum = 0.1f;

    float lr_at(int epoch) const;
    void validate() const;
    uint64_t digest() const;
};

struct Metrics {
    double accuracy = 0.0;
    double kappa = 0.0;
    Mat<int64_t> confusion;
};

double kappa(const Mat<int64_t>& confusion);

Metrics evaluate(const Network& net, const TrialDataset& data, const ActQuant* aq = nullptr,
                 int workers = 1);

// ---------------------------------------------------------------------------
// Adam

struct AdamSlot {
    std::vector<float> m, v;
};

struct AdamState {
    int64_t t = 0;
    std::map<std::string, AdamSlot> slots;
};

/// One bias-corrected Adam update on a flat parameter span. `t` is the
/// 1-based step count.
void adam_step(std::span<float> params, std::span<const float> grads, AdamSlot& slot, int64_t t,
               float lr, float beta1, float beta2, float eps);

void adam_step(Network& net, NetworkGrads& grads, AdamState& state, float lr, float beta1,
               float beta2, float eps);

// ---------------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    float lr = 0.0f;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double val_kappa = 0.0;
    double frozen_fraction = 0.0;
};

struct TrainResult {
    Network net;
    ActQuant act_quant;  // populated when QAT ran
    std::vector<EpochRecord> curve;
    Metrics final_train;
    Metrics final_val;  // meaningful when a validation set was given
};

/// Full training loop. Deterministic for a fixed hyper.seed and worker
/// count; with the default reduction the result is identical for any worker
/// count because per-trial contributions are summed in trial order.
TrainResult train(Network net, const TrialDataset& train_data, const TrialDataset* val_data,
                  const TrainHyper& hyper);

/// Subject-disjoint k-fold partitions, balanced within one subject.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(int n_subjects, int k,
                                                                       uint64_t seed);

/// Repeat-averaged experiments: trains `repeats` times with seeds
/// hyper.seed, hyper.seed+1, ... and aggregates the validation metrics.
struct RepeatSummary {
    std::vector<double> accuracies;
    std::vector<double> kappas;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_kappa = 0.0;
};

RepeatSummary run_repeats(const ModelConfig& config, const TrialDataset& train_data,
                          const TrialDataset& val_data, const TrainHyper& hyper, int repeats);

/// Training-curve emission: one line per epoch, whitespace separated.
std::string curve_text(const std::vector<EpochRecord>& curve);

}  // namespace mibminet
