// Command-line front end: resource estimation, synthetic data, training,
// channel selection, int8 export, inference, and float-vs-int8 verification.
//
// Exit codes: 0 success, 2 validation failure, 3 budget exceeded, 4 IO error.

#include "mibminet/channels.hpp"
#include "mibminet/dataio.hpp"
#include "mibminet/engine.hpp"
#include "mibminet/estimator.hpp"
#include "mibminet/quantizer.hpp"
#include "mibminet/trainer.hpp"
#include "mibminet/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::ordered_json;
using namespace mibminet;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;
constexpr int kExitIo = 4;

/// Written alongside every produced artifact; re-running the same manifest
/// reproduces the artifact bitwise, so it carries no timestamps.
void write_manifest(const std::string& artifact_path, const std::string& command,
                    const json& args, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["toolkit_version"] = kVersion;
    m["args"] = args;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(fnv1a(m.dump())));
    m["config_digest"] = digest;
    write_text_file(artifact_path + ".manifest.json", m.dump(2) + "\n");
}

struct TrainPreset {
    ModelConfig config;
    TrainHyper hyper;
    QatSchedule qat;  // applied only when --qat is requested
};

TrainPreset named_preset(const std::string& name) {
    TrainPreset p;
    if (name == "bci-iv2a") {
        p.config = {22, 750, 32, 64, 4};
        p.hyper.epochs = 500;
        p.hyper.batch_size = 32;
        p.hyper.lr_schedule = {{0, 1e-3f}};
        p.hyper.adam_eps = 1e-7f;
        p.qat = {450, 550, 650, 10, false};
        return p;
    }
    if (name == "physionet-mmmi") {
        p.config = {64, 480, 16, 128, 4};
        p.hyper.epochs = 100;
        p.hyper.batch_size = 16;
        p.hyper.lr_schedule = {{0, 1e-2f}, {40, 1e-3f}, {80, 1e-4f}};
        p.hyper.adam_eps = 1e-7f;
        p.qat = {60, 160, 260, 10, false};
        return p;
    }
    if (name == "synthetic") {
        p.config = {8, 256, 8, 32, 2};
        p.hyper.epochs = 60;
        p.hyper.batch_size = 32;
        p.hyper.lr_schedule = {{0, 1e-3f}};
        p.hyper.adam_eps = 1e-7f;
        p.qat = {20, 30, 60, 10, false};
        return p;
    }
    throw ValidationError("unknown preset '" + name + "' (use bci-iv2a, physionet-mmmi, or synthetic)");
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

// ---------------------------------------------------------------------------

int cmd_estimate(int nch, int ns, int nk, int nf, int ncl, int precision,
                 std::optional<int64_t> budget_bytes, const std::string& check_reference,
                 const std::string& kv_path) {
    ModelConfig config{nch, ns, nk, nf, ncl};
    ResourceReport report = estimate(config);
    std::cout << report_table(report);

    if (!check_reference.empty()) {
        auto cells = reference_cells(check_reference);
        auto devs = reference_discrepancies(check_reference);
        std::cout << "reference check (" << check_reference << "): " << cells.size() - devs.size()
                  << "/" << cells.size() << " cells exact\n";
        for (const auto& d : devs) {
            char line[160];
            std::snprintf(line, sizeof line,
                          "  deviation %-18s published %lld, computed %lld (%.2f%%)\n",
                          d.name.c_str(), (long long)d.published, (long long)d.computed,
                          100.0 * d.rel_deviation());
            std::cout << line;
        }
    }

    if (!kv_path.empty()) {
        write_text_file(kv_path, report_kv(report));
        json args{{"nch", nch}, {"ns", ns},   {"nk", nk},
                  {"nf", nf},   {"ncl", ncl}, {"precision", precision}};
        write_manifest(kv_path, "estimate", args, {}, {kv_path});
    }

    if (budget_bytes) {
        BudgetCheck check = check_budget(report, precision, Budget{*budget_bytes});
        char line[128];
        std::snprintf(line, sizeof line, "budget: %lld B at %d-bit -> %s (margin %lld B)\n",
                      (long long)*budget_bytes, precision, check.fits ? "fits" : "exceeded",
                      (long long)check.margin_bytes);
        std::cout << line;
        if (!check.fits) return kExitBudget;
    }
    return kExitOk;
}

int cmd_synth_data(const std::string& out, int nch, int ns, double rate, int per_class,
                   double sigma, uint64_t seed, uint64_t mixing_seed,
                   const std::string& classes_flag) {
    SynthSpec spec = default_synth_spec();
    spec.n_ch = nch;
    spec.n_samples = ns;
    spec.sample_rate_hz = rate;
    spec.noise_sigma = sigma;
    spec.mixing_seed = mixing_seed;
    if (!classes_flag.empty()) {
        // "ch[+ch...]:hz:amp,..." one entry per class
        spec.classes.clear();
        std::stringstream ss(classes_flag);
        std::string entry;
        while (std::getline(ss, entry, ',')) {
            std::stringstream es(entry);
            std::string chans, hz, amp;
            if (!std::getline(es, chans, ':') || !std::getline(es, hz, ':'))
                throw ValidationError("--classes entries must look like 2+5:10:2.0");
            std::getline(es, amp, ':');
            ClassSignal cs;
            std::stringstream cl(chans);
            std::string ch;
            while (std::getline(cl, ch, '+')) cs.channels.push_back(std::stoi(ch));
            cs.center_hz = std::stod(hz);
            cs.amplitude = amp.empty() ? 2.0 : std::stod(amp);
            spec.classes.push_back(std::move(cs));
        }
    }
    TrialDataset d = synth(spec, per_class, seed);
    write_trials(out, d);
    json args{{"nch", nch},     {"ns", ns},
              {"rate", rate},   {"trials_per_class", per_class},
              {"sigma", sigma}, {"seed", seed},
              {"mixing_seed", mixing_seed}, {"classes", classes_flag}};
    write_manifest(out, "synth-data", args, {}, {out});
    std::cout << "wrote " << d.n_trials() << " trials (" << d.n_ch << " ch x " << d.n_samples
              << " samples, " << d.n_classes << " classes) to " << out << "\n";
    return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& val_path,
              const std::string& out_path, const std::string& preset_name, int nch, int ns,
              int nk, int nf, uint64_t seed, int epochs, int batch, double lr,
              const std::string& qat_flag, int workers, const std::string& curve_path) {
    TrialDataset data = read_trials(data_path);

    TrainPreset preset = named_preset(preset_name);
    ModelConfig config = preset.config;
    TrainHyper hyper = preset.hyper;
    if (nch > 0) config.n_ch = nch;
    if (ns > 0) config.n_s = ns;
    if (nk > 0) config.n_k = nk;
    if (nf > 0) config.n_f = nf;
    config.n_cl = data.n_classes;
    if (epochs > 0) hyper.epochs = epochs;
    if (batch > 0) hyper.batch_size = batch;
    if (lr > 0) hyper.lr_schedule = {{0, static_cast<float>(lr)}};
    hyper.seed = seed;
    hyper.workers = workers;
    if (!qat_flag.empty()) {
        QatSchedule q = preset.qat;
        if (qat_flag != "preset") {
            auto parts = parse_int_list(qat_flag);
            if (parts.size() != 3)
                throw ValidationError("--qat expects ta,tw,tend (or 'preset')");
            q.t_a = parts[0];
            q.t_w = parts[1];
            q.t_end = parts[2];
        }
        hyper.qat = q;
        hyper.epochs = q.t_end;  // t_end is the total epoch count
    }

    if (data.n_ch != config.n_ch || data.n_samples != config.n_s)
        throw ValidationError("train: dataset is " + std::to_string(data.n_ch) + "x" +
                              std::to_string(data.n_samples) + " but the model expects " +
                              std::to_string(config.n_ch) + "x" + std::to_string(config.n_s));

    std::optional<TrialDataset> val;
    if (!val_path.empty()) val = read_trials(val_path);

    Network net = build(config, seed);
    TrainResult result = train(std::move(net), data, val ? &*val : nullptr, hyper);

    Checkpoint ckpt;
    ckpt.net = std::move(result.net);
    ckpt.seed = seed;
    ckpt.epochs = static_cast<uint32_t>(hyper.epochs);
    ckpt.hyper_digest = hyper.digest();
    save_checkpoint(out_path, ckpt);

    json args{{"data", data_path}, {"val", val_path},   {"preset", preset_name},
              {"seed", seed},      {"epochs", hyper.epochs}, {"batch", hyper.batch_size},
              {"qat", qat_flag},   {"workers", workers}};
    std::vector<std::string> outputs{out_path};
    if (!curve_path.empty()) {
        write_text_file(curve_path, curve_text(result.curve));
        outputs.push_back(curve_path);
    }
    write_manifest(out_path, "train", args, {data_path}, outputs);

    char line[160];
    std::snprintf(line, sizeof line, "trained %d epochs: train acc %.4f%s\n", hyper.epochs,
                  result.final_train.accuracy,
                  val ? (" val acc " + std::to_string(result.final_val.accuracy)).c_str() : "");
    std::cout << line;
    return kExitOk;
}

int cmd_select_channels(const std::string& data_path, const std::vector<std::string>& ckpt_paths,
                        int n_bar, const std::string& preset_name,
                        const std::string& ranking_path, const std::string& out_data_path) {
    TrialDataset data = read_trials(data_path);
    std::vector<int> kept;
    ChannelRanking ranking;

    if (!preset_name.empty()) {
        ElectrodePreset p = preset(preset_name);
        for (const auto& electrode : p.electrodes) {
            bool found = false;
            for (int i = 0; i < data.n_ch; ++i) {
                std::string a = data.channel_names[i], b = electrode;
                for (auto& ch : a) ch = std::toupper(static_cast<unsigned char>(ch));
                for (auto& ch : b) ch = std::toupper(static_cast<unsigned char>(ch));
                if (a == b) {
                    kept.push_back(i);
                    found = true;
                    break;
                }
            }
            if (!found)
                throw ValidationError("preset electrode " + electrode + " not in the dataset");
        }
        std::cout << "preset " << p.name << ": " << kept.size() << " channels\n";
    } else {
        if (ckpt_paths.empty())
            throw ValidationError("--checkpoint is required for ranked selection");
        // several checkpoints average the per-channel filter norms
        std::vector<MatF> spatial_weights;
        for (const auto& p : ckpt_paths) {
            Checkpoint ckpt = load_checkpoint(p);
            if (ckpt.net.config.n_ch != data.n_ch)
                throw ValidationError("checkpoint channel count does not match the dataset");
            spatial_weights.push_back(ckpt.net.spatial.weights);
        }
        ranking = spatial_weights.size() == 1
                      ? rank_channels(spatial_weights[0], data.channel_names)
                      : rank_channels_averaged(spatial_weights, data.channel_names);
        kept = select_top(ranking, n_bar);
        std::sort(kept.begin(), kept.end());
        for (const auto& e : ranking.entries) {
            char line[96];
            std::snprintf(line, sizeof line, "  %-8s (ch %2d)  norm %.6f\n", e.name.c_str(),
                          e.index, e.norm);
            std::cout << line;
        }
        if (!ranking_path.empty()) {
            write_text_file(ranking_path, ranking.kv());
            json args{{"data", data_path}, {"checkpoints", ckpt_paths}, {"n_bar", n_bar}};
            std::vector<std::string> inputs{data_path};
            inputs.insert(inputs.end(), ckpt_paths.begin(), ckpt_paths.end());
            write_manifest(ranking_path, "select-channels", args, inputs, {ranking_path});
        }
    }

    if (!out_data_path.empty()) {
        TrialDataset reduced = select_channels(data, kept);
        write_trials(out_data_path, reduced);
        json args{{"data", data_path},
                  {"checkpoints", ckpt_paths},
                  {"n_bar", n_bar},
                  {"preset", preset_name}};
        write_manifest(out_data_path, "select-channels", args, {data_path}, {out_data_path});
        std::cout << "wrote reduced dataset (" << reduced.n_ch << " ch) to " << out_data_path
                  << "\n";
    }
    return kExitOk;
}

int cmd_quantize(const std::string& ckpt_path, const std::string& calib_path,
                 const std::string& out_path, double percentile) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrialDataset calib = read_trials(calib_path);
    QuantNetwork qnet = export_quantized(ckpt.net, calib, percentile);
    save_qnet(out_path, qnet);
    json args{{"checkpoint", ckpt_path}, {"calib", calib_path}, {"percentile", percentile}};
    write_manifest(out_path, "quantize", args, {ckpt_path, calib_path}, {out_path});
    std::cout << "exported int8 network: input scale 2^-" << qnet.input_scale_exp
              << ", logit scale 2^-" << qnet.logit_scale_exp << " -> " << out_path << "\n";
    return kExitOk;
}

int cmd_infer(const std::string& qnet_path, const std::string& data_path,
              const std::string& trace_path, const std::string& out_path) {
    QuantNetwork qnet = load_qnet(qnet_path);
    TrialDataset data = read_trials(data_path);
    if (data.n_ch != qnet.config.n_ch || data.n_samples != qnet.config.n_s)
        throw ValidationError("infer: dataset does not match the network dimensions");

    Mat<int64_t> confusion = Mat<int64_t>::Zero(qnet.config.n_cl, qnet.config.n_cl);
    std::ostringstream pred;
    pred << "# trial predicted label\n";
    ExecutionTrace last_trace;
    for (size_t i = 0; i < data.n_trials(); ++i) {
        auto [qx, sat] = quantize_input(qnet, data.trials[i]);
        EngineResult r = run(qnet, qx);
        Eigen::Index arg = 0;
        r.logits.maxCoeff(&arg);
        confusion(data.labels[i], arg)++;
        pred << i << " " << arg << " " << data.labels[i] << "\n";
        last_trace = std::move(r.trace);
    }
    const double acc = double(confusion.trace()) / double(data.n_trials());
    char line[128];
    std::snprintf(line, sizeof line, "int8 inference: %zu trials, accuracy %.4f, kappa %.4f\n",
                  data.n_trials(), acc, kappa(confusion));
    std::cout << line;
    std::cout << last_trace.text();

    if (!trace_path.empty()) write_text_file(trace_path, last_trace.kv());
    if (!out_path.empty()) {
        write_text_file(out_path, pred.str());
        json args{{"qnet", qnet_path}, {"data", data_path}};
        write_manifest(out_path, "infer", args, {qnet_path, data_path}, {out_path});
    }
    return kExitOk;
}

int cmd_verify(const std::string& qnet_path, const std::string& ckpt_path,
               const std::string& data_path, const std::string& out_path) {
    QuantNetwork qnet = load_qnet(qnet_path);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrialDataset data = read_trials(data_path);
    if (!(ckpt.net.config == qnet.config))
        throw ValidationError("verify: checkpoint and qnet configs differ");
    if (data.n_ch != qnet.config.n_ch || data.n_samples != qnet.config.n_s)
        throw ValidationError("verify: dataset does not match the network dimensions");

    std::ostringstream report;
    report << "# trial agree float_pred int8_pred max_logit_delta input_saturations\n";
    size_t agree = 0;
    double max_delta_all = 0.0;
    int64_t input_sats = 0, requant_sats = 0;
    for (size_t i = 0; i < data.n_trials(); ++i) {
        VecF flogits = forward(ckpt.net, data.trials[i]);
        auto [qx, sat] = quantize_input(qnet, data.trials[i]);
        EngineResult r = run(qnet, qx);
        input_sats += sat;
        requant_sats += r.trace.requant_saturations;

        Eigen::Index farg = 0, qarg = 0;
        flogits.maxCoeff(&farg);
        r.logits.maxCoeff(&qarg);
        agree += (farg == qarg);

        double max_delta = 0.0;
        for (Eigen::Index c = 0; c < flogits.size(); ++c) {
            const double deq = std::ldexp(double(r.logits(c)), -qnet.logit_scale_exp);
            max_delta = std::max(max_delta, std::abs(deq - double(flogits(c))));
        }
        max_delta_all = std::max(max_delta_all, max_delta);
        char line[128];
        std::snprintf(line, sizeof line, "%zu %d %lld %lld %.6f %lld\n", i, int(farg == qarg),
                      (long long)farg, (long long)qarg, max_delta, (long long)sat);
        report << line;
    }
    const double rate = double(agree) / double(data.n_trials());
    char line[192];
    std::snprintf(line, sizeof line,
                  "float-vs-int8: agreement %.4f (%zu/%zu), max logit delta %.6f, "
                  "input saturations %lld, requant saturations %lld\n",
                  rate, agree, data.n_trials(), max_delta_all, (long long)input_sats,
                  (long long)requant_sats);
    std::cout << line;
    report << "# summary agreement=" << rate << "\n";

    if (!out_path.empty()) {
        write_text_file(out_path, report.str());
        json args{{"qnet", qnet_path}, {"checkpoint", ckpt_path}, {"data", data_path}};
        write_manifest(out_path, "verify", args, {qnet_path, ckpt_path, data_path}, {out_path});
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MI-BMInet toolkit: compact EEG CNN training, channel selection, int8 export, "
                 "and resource estimation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // estimate
    auto* est = app.add_subcommand("estimate", "per-layer resource accounting for a config");
    int e_nch = 0, e_ns = 0, e_nk = 0, e_nf = 0, e_ncl = 0, e_prec = 8;
    std::optional<int64_t> e_budget;
    std::string e_ref, e_kv;
    est->add_option("--nch", e_nch, "EEG channels")->required();
    est->add_option("--ns", e_ns, "samples per trial")->required();
    est->add_option("--nk", e_nk, "filter count")->required();
    est->add_option("--nf", e_nf, "temporal kernel length")->required();
    est->add_option("--ncl", e_ncl, "class count")->required();
    est->add_option("--precision", e_prec, "element width in bits (8 or 32)");
    est->add_option("--budget", e_budget, "memory budget in bytes (exit 3 when exceeded)");
    est->add_option("--check-reference", e_ref, "compare against published cells (bci-iv2a or physionet-mmmi)");
    est->add_option("--kv", e_kv, "write machine-readable report to this path");

    // synth-data
    auto* syn = app.add_subcommand("synth-data", "generate a synthetic MIBT dataset");
    std::string s_out, s_classes;
    int s_nch = 8, s_ns = 256, s_per = 200;
    double s_rate = 128.0, s_sigma = 1.0;
    uint64_t s_seed = 1, s_mix = 7;
    syn->add_option("--out", s_out, "output MIBT path")->required();
    syn->add_option("--nch", s_nch, "channel count");
    syn->add_option("--ns", s_ns, "samples per trial");
    syn->add_option("--rate", s_rate, "sample rate in Hz");
    syn->add_option("--trials-per-class", s_per, "trials per class");
    syn->add_option("--sigma", s_sigma, "white noise sigma");
    syn->add_option("--seed", s_seed, "generator seed");
    syn->add_option("--mixing-seed", s_mix, "spatial mixing seed");
    syn->add_option("--classes", s_classes, "per-class signals, e.g. 2:10:2.0,5:22:2.0");

    // train
    auto* tr = app.add_subcommand("train", "train a model on an MIBT dataset");
    std::string t_data, t_val, t_out, t_preset = "synthetic", t_qat, t_curve;
    int t_nch = 0, t_ns = 0, t_nk = 0, t_nf = 0, t_epochs = 0, t_batch = 0, t_workers = 1;
    double t_lr = 0.0;
    uint64_t t_seed = 1;
    tr->add_option("--data", t_data, "training MIBT path")->required();
    tr->add_option("--val", t_val, "validation MIBT path");
    tr->add_option("--out", t_out, "output checkpoint path")->required();
    tr->add_option("--preset,--config", t_preset, "bci-iv2a | physionet-mmmi | synthetic");
    tr->add_option("--nch", t_nch, "override: channels");
    tr->add_option("--ns", t_ns, "override: samples");
    tr->add_option("--nk", t_nk, "override: filters");
    tr->add_option("--nf", t_nf, "override: temporal kernel");
    tr->add_option("--seed", t_seed, "training seed");
    tr->add_option("--epochs", t_epochs, "override: epochs");
    tr->add_option("--batch", t_batch, "override: batch size");
    tr->add_option("--lr", t_lr, "override: fixed learning rate");
    tr->add_option("--qat", t_qat, "quantization-aware training: ta,tw,tend or 'preset'");
    tr->add_option("--workers", t_workers, "worker threads");
    tr->add_option("--curve", t_curve, "write per-epoch training curve here");

    // select-channels
    auto* sel = app.add_subcommand("select-channels", "rank channels or apply an electrode preset");
    std::string c_data, c_preset, c_ranking, c_out;
    std::vector<std::string> c_ckpts;
    int c_nbar = 0;
    sel->add_option("--data", c_data, "MIBT path")->required();
    sel->add_option("--checkpoint", c_ckpts,
                    "trained checkpoint (repeat to average filter norms)");
    sel->add_option("--n-bar", c_nbar, "keep the n strongest-ranked channels");
    sel->add_option("--preset", c_preset, "electrode preset name instead of ranking");
    sel->add_option("--out-ranking", c_ranking, "write the ranking (key=value) here");
    sel->add_option("--out-data", c_out, "write the reduced dataset here");

    // quantize
    auto* qz = app.add_subcommand("quantize", "export a checkpoint to an int8 network");
    std::string q_ckpt, q_calib, q_out;
    double q_pct = 0.999;
    qz->add_option("--checkpoint", q_ckpt, "trained checkpoint")->required();
    qz->add_option("--calib", q_calib, "calibration MIBT path")->required();
    qz->add_option("--out", q_out, "output qnet path")->required();
    qz->add_option("--percentile", q_pct, "|activation| calibration percentile");

    // infer
    auto* inf = app.add_subcommand("infer", "run int8 inference over a dataset");
    std::string i_qnet, i_data, i_trace, i_out;
    inf->add_option("--qnet", i_qnet, "qnet path")->required();
    inf->add_option("--data", i_data, "MIBT path")->required();
    inf->add_option("--trace", i_trace, "write the execution trace (key=value) here");
    inf->add_option("--out", i_out, "write per-trial predictions here");

    // verify
    auto* ver = app.add_subcommand("verify", "float-vs-int8 agreement report");
    std::string v_qnet, v_ckpt, v_data, v_out;
    ver->add_option("--qnet", v_qnet, "qnet path")->required();
    ver->add_option("--checkpoint", v_ckpt, "float checkpoint path")->required();
    ver->add_option("--data", v_data, "MIBT path")->required();
    ver->add_option("--out", v_out, "write the per-trial report here");

    try {
        app.parse(argc, argv);
        if (est->parsed())
            return cmd_estimate(e_nch, e_ns, e_nk, e_nf, e_ncl, e_prec, e_budget, e_ref, e_kv);
        if (syn->parsed())
            return cmd_synth_data(s_out, s_nch, s_ns, s_rate, s_per, s_sigma, s_seed, s_mix,
                                  s_classes);
        if (tr->parsed())
            return cmd_train(t_data, t_val, t_out, t_preset, t_nch, t_ns, t_nk, t_nf, t_seed,
                             t_epochs, t_batch, t_lr, t_qat, t_workers, t_curve);
        if (sel->parsed())
            return cmd_select_channels(c_data, c_ckpts, c_nbar, c_preset, c_ranking, c_out);
        if (qz->parsed()) return cmd_quantize(q_ckpt, q_calib, q_out, q_pct);
        if (inf->parsed()) return cmd_infer(i_qnet, i_data, i_trace, i_out);
        if (ver->parsed()) return cmd_verify(v_qnet, v_ckpt, v_data, v_out);
        return kExitValidation;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
