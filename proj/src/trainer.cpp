#include "mibminet/trainer.hpp"

#include "mibminet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mibminet {

void QatSchedule::validate() const {
    if (!(0 < t_a && t_a < t_w && t_w < t_end))
        throw ValidationError("qat schedule: need 0 < t_a < t_w < t_end");
    if (rpr_step < 1) throw ValidationError("qat schedule: rpr_step must be >= 1");
}

double rpr_schedule(int epoch, const QatSchedule& q) {
    q.validate();
    if (epoch < q.t_w) return 0.0;
    if (epoch >= q.t_end) return 1.0;
    const int steps_total = (q.t_end - q.t_w + q.rpr_step - 1) / q.rpr_step;
    const int steps_done = (epoch - q.t_w) / q.rpr_step;
    return std::min(1.0, double(steps_done) / double(steps_total));
}

float TrainHyper::lr_at(int epoch) const {
    float lr = lr_schedule.front().second;
    for (const auto& [e, v] : lr_schedule)
        if (epoch >= e) lr = v;
    return lr;
}

void TrainHyper::validate() const {
    if (epochs < 0) throw ValidationError("hyper: epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("hyper: batch size must be >= 1");
    if (lr_schedule.empty()) throw ValidationError("hyper: empty learning-rate schedule");
    for (const auto& [e, v] : lr_schedule)
        if (!(v > 0.0f)) throw ValidationError("hyper: learning rates must be > 0");
    if (workers < 1) throw ValidationError("hyper: workers must be >= 1");
    if (qat) {
        qat->validate();
        if (qat->t_end > epochs)
            throw ValidationError("hyper: qat t_end exceeds total epoch count");
    }
}

uint64_t TrainHyper::digest() const {
    uint64_t h = fnv1a(&epochs, sizeof epochs);
    h = fnv1a(&batch_size, sizeof batch_size, h);
    for (const auto& [e, v] : lr_schedule) {
        h = fnv1a(&e, sizeof e, h);
        h = fnv1a(&v, sizeof v, h);
    }
    h = fnv1a(&adam_beta1, sizeof adam_beta1, h);
    h = fnv1a(&adam_beta2, sizeof adam_beta2, h);
    h = fnv1a(&adam_eps, sizeof adam_eps, h);
    h = fnv1a(&seed, sizeof seed, h);
    h = fnv1a(&bn_momentum, sizeof bn_momentum, h);
    if (qat) {
        h = fnv1a(&qat->t_a, sizeof qat->t_a, h);
        h = fnv1a(&qat->t_w, sizeof qat->t_w, h);
        h = fnv1a(&qat->t_end, sizeof qat->t_end, h);
        h = fnv1a(&qat->rpr_step, sizeof qat->rpr_step, h);
        h = fnv1a(&qat->monotone_partitions, sizeof qat->monotone_partitions, h);
    }
    return h;
}

double kappa(const Mat<int64_t>& confusion) {
    const int64_t total = confusion.sum();
    if (total == 0) throw ValidationError("kappa: empty confusion matrix");
    const double p_o = double(confusion.trace()) / double(total);
    double p_e = 0.0;
    for (Eigen::Index c = 0; c < confusion.rows(); ++c)
        p_e += double(confusion.row(c).sum()) * double(confusion.col(c).sum());
    p_e /= double(total) * double(total);
    if (p_e >= 1.0) return 1.0;  // degenerate marginals: all mass in one class
    return (p_o - p_e) / (1.0 - p_e);
}

Metrics evaluate(const Network& net, const TrialDataset& data, const ActQuant* aq, int workers) {
    data.validate();
    const int n_cl = net.config.n_cl;
    std::vector<int> predicted(data.n_trials());
    parallel_for(data.n_trials(), workers, [&](size_t i) {
        VecF logits = forward(net, data.trials[i], aq);
        Eigen::Index arg = 0;
        logits.maxCoeff(&arg);
        predicted[i] = static_cast<int>(arg);
    });
    Metrics m;
    m.confusion = Mat<int64_t>::Zero(n_cl, n_cl);
    for (size_t i = 0; i < data.n_trials(); ++i) m.confusion(data.labels[i], predicted[i])++;
    m.accuracy = double(m.confusion.trace()) / double(data.n_trials());
    m.kappa = kappa(m.confusion);
    return m;
}

void adam_step(std::span<float> params, std::span<const float> grads, AdamSlot& slot, int64_t t,
               float lr, float beta1, float beta2, float eps) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient size mismatch");
    if (slot.m.size() != params.size()) {
        slot.m.assign(params.size(), 0.0f);
        slot.v.assign(params.size(), 0.0f);
    }
    const double bc1 = 1.0 - std::pow(double(beta1), double(t));
    const double bc2 = 1.0 - std::pow(double(beta2), double(t));
    for (size_t i = 0; i < params.size(); ++i) {
        slot.m[i] = beta1 * slot.m[i] + (1.0f - beta1) * grads[i];
        slot.v[i] = beta2 * slot.v[i] + (1.0f - beta2) * grads[i] * grads[i];
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
}

void adam_step(Network& net, NetworkGrads& grads, AdamState& state, float lr, float beta1,
               float beta2, float eps) {
    ++state.t;
    for_each_param(net, grads, [&](const char* name, float* w, float* g, size_t n, bool) {
        adam_step(std::span<float>(w, n), std::span<const float>(g, n), state.slots[name],
                  state.t, lr, beta1, beta2, eps);
    });
}

namespace {

/// Random-partition weight freezing. Frozen entries hold their
/// quantize-dequantize image; their gradients are zeroed and their values
/// re-imposed after each optimizer step until the next re-partition.
struct RprState {
    double fraction = 0.0;
    std::map<std::string, std::vector<uint8_t>> mask;
    std::map<std::string, std::vector<float>> value;

    void repartition(Network& net, NetworkGrads& scratch, double new_fraction, bool monotone,
                     Rng& rng) {
        fraction = new_fraction;
        for_each_param(net, scratch,
                       [&](const char* name, float* w, float*, size_t n, bool is_weight) {
            if (!is_weight) return;
            auto& msk = mask[name];
            auto& val = value[name];
            const size_t target = static_cast<size_t>(std::llround(new_fraction * double(n)));
            if (!monotone || msk.size() != n) {
                msk.assign(n, 0);
                val.assign(n, 0.0f);
            }
            size_t frozen = static_cast<size_t>(std::count(msk.begin(), msk.end(), uint8_t(1)));
            if (frozen >= target) return;
            std::vector<size_t> open;
            open.reserve(n - frozen);
            for (size_t i = 0; i < n; ++i)
                if (!msk[i]) open.push_back(i);
            // partial Fisher-Yates over the still-trainable entries
            const size_t need = target - frozen;
            for (size_t i = 0; i < need; ++i) {
                const size_t j = i + rng.below(open.size() - i);
                std::swap(open[i], open[j]);
            }
            double amax = 0.0;
            for (size_t i = 0; i < n; ++i) amax = std::max(amax, double(std::fabs(w[i])));
            const int scale = choose_scale_exp(amax);
            for (size_t i = 0; i < need; ++i) {
                msk[open[i]] = 1;
                val[open[i]] = fake_quant_value(w[open[i]], scale);
            }
        });
        impose(net, scratch);
    }

    void zero_frozen_grads(Network& net, NetworkGrads& grads) {
        for_each_param(net, grads, [&](const char* name, float*, float* g, size_t n, bool w) {
            if (!w) return;
            auto it = mask.find(name);
            if (it == mask.end()) return;
            for (size_t i = 0; i < n; ++i)
                if (it->second[i]) g[i] = 0.0f;
        });
    }

    void impose(Network& net, NetworkGrads& scratch) {
        for_each_param(net, scratch,
                       [&](const char* name, float* w, float*, size_t n, bool is_weight) {
            if (!is_weight) return;
            auto it = mask.find(name);
            if (it == mask.end()) return;
            const auto& val = value[name];
            for (size_t i = 0; i < n; ++i)
                if (it->second[i]) w[i] = val[i];
        });
    }
};

}  // namespace

TrainResult train(Network net, const TrialDataset& train_data, const TrialDataset* val_data,
                  const TrainHyper& hyper) {
    hyper.validate();
    train_data.validate();
    if (train_data.n_trials() == 0) throw ValidationError("train: empty dataset");
    if (train_data.n_ch != net.config.n_ch || train_data.n_samples != net.config.n_s)
        throw ShapeError("train: dataset dimensions do not match the model config");
    if (train_data.n_classes > net.config.n_cl)
        throw ValidationError("train: dataset has more classes than the model outputs");

    TrainResult result;
    result.act_quant.enabled = false;

    Rng shuffle_rng(hyper.seed);
    Rng rpr_rng(hyper.seed ^ 0xa5a5a5a55a5a5a5aull);
    AdamState adam;
    RprState rpr;
    NetworkGrads scratch = NetworkGrads::zero(net.config);
    ActQuant& aq = result.act_quant;

    std::vector<size_t> order(train_data.n_trials());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const float lr = hyper.lr_at(epoch);
        if (hyper.qat && epoch >= hyper.qat->t_a) aq.enabled = true;
        if (hyper.qat && epoch >= hyper.qat->t_w) {
            const double frac = rpr_schedule(epoch, *hyper.qat);
            if (frac != rpr.fraction)
                rpr.repartition(net, scratch, frac, hyper.qat->monotone_partitions, rpr_rng);
        }

        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const size_t stop = std::min(order.size(), start + hyper.batch_size);
            Batch<float> xs;
            xs.reserve(stop - start);
            std::vector<uint16_t> ys;
            for (size_t i = start; i < stop; ++i) {
                xs.push_back(train_data.trials[order[i]]);
                ys.push_back(train_data.labels[order[i]]);
            }
            TrainCache cache;
            aq.track = true;
            auto logits = forward_train(net, xs, aq.enabled ? &aq : nullptr, cache,
                                        hyper.bn_momentum, hyper.workers);
            std::vector<VecF> dlogits(xs.size());
            const float inv_b = 1.0f / float(xs.size());
            for (size_t i = 0; i < xs.size(); ++i) {
                auto [loss, grad] = softmax_cross_entropy(logits[i], ys[i]);
                loss_sum += loss;
                dlogits[i] = grad * inv_b;
                Eigen::Index arg = 0;
                logits[i].maxCoeff(&arg);
                correct += (arg == ys[i]);
            }
            NetworkGrads grads = backward_train(net, cache, dlogits, hyper.workers);
            rpr.zero_frozen_grads(net, grads);
            adam_step(net, grads, adam, lr, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps);
            rpr.impose(net, scratch);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.loss = loss_sum / double(train_data.n_trials());
        rec.train_accuracy = double(correct) / double(train_data.n_trials());
        rec.frozen_fraction = rpr.fraction;
        if (val_data) {
            aq.track = false;
            Metrics m = evaluate(net, *val_data, aq.enabled ? &aq : nullptr, hyper.workers);
            rec.val_accuracy = m.accuracy;
            rec.val_kappa = m.kappa;
        }
        result.curve.push_back(rec);
    }

    aq.track = false;
    const ActQuant* eval_aq = aq.enabled ? &aq : nullptr;
    result.final_train = evaluate(net, train_data, eval_aq, hyper.workers);
    if (val_data) result.final_val = evaluate(net, *val_data, eval_aq, hyper.workers);
    result.net = std::move(net);
    return result;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(int n_subjects, int k,
                                                                       uint64_t seed) {
    if (k < 2 || n_subjects < k)
        throw ValidationError("kfold: need 2 <= k <= n_subjects");
    std::vector<int> subjects(n_subjects);
    std::iota(subjects.begin(), subjects.end(), 0);
    Rng rng(seed);
    for (size_t i = subjects.size(); i > 1; --i)
        std::swap(subjects[i - 1], subjects[rng.below(i)]);

    std::vector<std::vector<int>> folds(k);
    for (int i = 0; i < n_subjects; ++i) folds[i % k].push_back(subjects[i]);

    std::vector<std::pair<std::vector<int>, std::vector<int>>> out(k);
    for (int f = 0; f < k; ++f) {
        out[f].second = folds[f];
        for (int g = 0; g < k; ++g)
            if (g != f)
                out[f].first.insert(out[f].first.end(), folds[g].begin(), folds[g].end());
        std::sort(out[f].first.begin(), out[f].first.end());
        std::sort(out[f].second.begin(), out[f].second.end());
    }
    return out;
}

RepeatSummary run_repeats(const ModelConfig& config, const TrialDataset& train_data,
                          const TrialDataset& val_data, const TrainHyper& hyper, int repeats) {
    if (repeats < 1) throw ValidationError("run_repeats: repeats must be >= 1");
    RepeatSummary s;
    for (int r = 0; r < repeats; ++r) {
        TrainHyper h = hyper;
        h.seed = hyper.seed + uint64_t(r);
        TrainResult result = train(build(config, h.seed), train_data, &val_data, h);
        s.accuracies.push_back(result.final_val.accuracy);
        s.kappas.push_back(result.final_val.kappa);
    }
    for (double a : s.accuracies) s.mean_accuracy += a;
    s.mean_accuracy /= repeats;
    for (double k : s.kappas) s.mean_kappa += k;
    s.mean_kappa /= repeats;
    for (double a : s.accuracies)
        s.std_accuracy += (a - s.mean_accuracy) * (a - s.mean_accuracy);
    s.std_accuracy = std::sqrt(s.std_accuracy / repeats);
    return s;
}

std::string curve_text(const std::vector<EpochRecord>& curve) {
    std::ostringstream os;
    os << "# epoch lr loss train_acc val_acc val_kappa frozen_fraction\n";
    for (const auto& r : curve) {
        char line[192];
        std::snprintf(line, sizeof line, "%d %.6g %.8f %.6f %.6f %.6f %.3f\n", r.epoch,
                      double(r.lr), r.loss, r.train_accuracy, r.val_accuracy, r.val_kappa,
                      r.frozen_fraction);
        os << line;
    }
    return os.str();
}

}  // namespace mibminet
