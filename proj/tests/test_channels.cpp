#include "mibminet/channels.hpp"

#include "mibminet/dataio.hpp"

#include <doctest.h>

#include <set>

using namespace mibminet;

TEST_CASE("ranking by spatial-filter column norms") {
    MatF w(2, 3);
    w << 3, 0, 4, 0, 0, 0;
    ChannelRanking r = rank_channels(w);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].index == 2);
    CHECK(r.entries[0].norm == doctest::Approx(4.0));
    CHECK(r.entries[1].index == 0);
    CHECK(r.entries[1].norm == doctest::Approx(3.0));
    CHECK(r.entries[2].index == 1);
    CHECK(r.entries[2].norm == doctest::Approx(0.0));

    // single live column dominates
    MatF w2 = MatF::Zero(4, 5);
    w2(0, 3) = 2.0f;
    w2(3, 3) = -1.0f;
    ChannelRanking r2 = rank_channels(w2);
    CHECK(r2.entries[0].index == 3);
    for (size_t i = 1; i < r2.entries.size(); ++i) CHECK(r2.entries[i].norm == 0.0);

    MatF empty;
    CHECK_THROWS_AS(rank_channels(empty), ValidationError);
}

TEST_CASE("ties break by ascending channel index") {
    MatF w = MatF::Ones(2, 4);
    ChannelRanking r = rank_channels(w);
    for (int i = 0; i < 4; ++i) CHECK(r.entries[i].index == i);
}

TEST_CASE("ranking is a permutation and scale-equivariant") {
    Rng rng(5);
    for (int it = 0; it < 30; ++it) {
        MatF w(3, 6);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = float(rng.uniform(-2, 2));
        ChannelRanking r = rank_channels(w);
        std::set<int> seen;
        for (const auto& e : r.entries) seen.insert(e.index);
        CHECK(seen.size() == 6);

        const float c = float(rng.uniform(0.1, 5.0));
        ChannelRanking scaled = rank_channels(MatF(c * w));
        for (size_t i = 0; i < r.entries.size(); ++i) {
            CHECK(scaled.entries[i].index == r.entries[i].index);
            CHECK(scaled.entries[i].norm ==
                  doctest::Approx(double(c) * r.entries[i].norm).epsilon(1e-4));
        }
    }
}

TEST_CASE("averaged ranking over checkpoints") {
    MatF a = MatF::Zero(1, 3), b = MatF::Zero(1, 3);
    a(0, 0) = 4.0f;
    b(0, 1) = 2.0f;
    ChannelRanking r = rank_channels_averaged({a, b});
    CHECK(r.entries[0].index == 0);
    CHECK(r.entries[0].norm == doctest::Approx(2.0));
    CHECK(r.entries[1].index == 1);
    CHECK(r.entries[1].norm == doctest::Approx(1.0));
}

TEST_CASE("select_top prefix and nesting") {
    MatF w(2, 3);
    w << 3, 0, 4, 0, 0, 0;
    ChannelRanking r = rank_channels(w);
    CHECK(select_top(r, 3) == std::vector<int>{2, 0, 1});
    CHECK(select_top(r, 2) == std::vector<int>{2, 0});
    CHECK(select_top(r, 1) == std::vector<int>{2});
    for (int a = 1; a <= 3; ++a)
        for (int b = a; b <= 3; ++b) {
            auto small = select_top(r, a);
            auto large = select_top(r, b);
            for (int ch : small)
                CHECK(std::find(large.begin(), large.end(), ch) != large.end());
        }
    CHECK_THROWS_AS(select_top(r, 0), ValidationError);
    CHECK_THROWS_AS(select_top(r, 4), ValidationError);
}

TEST_CASE("electrode presets match the published rows") {
    CHECK(preset("central-3").electrodes == std::vector<std::string>{"C3", "CZ", "C4"});
    CHECK(preset("Central-11").electrodes ==
          std::vector<std::string>{"T9", "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8",
                                   "T10"});
    CHECK(preset("center+frontal-6").electrodes ==
          std::vector<std::string>{"C3", "CZ", "C4", "FC3", "FCZ", "FC4"});
    CHECK(preset("center+parietal-10").electrodes ==
          std::vector<std::string>{"C5", "C3", "CZ", "C4", "C6", "CP5", "CP3", "CPZ", "CP4",
                                   "CP6"});
    CHECK(preset("distributed-19").electrodes.size() == 19);

    // every published row's cardinality matches the number in its name
    int rows = 0;
    for (const auto& name : preset_names()) {
        ElectrodePreset p = preset(name);
        const auto dash = name.rfind('-');
        CHECK(p.electrodes.size() == size_t(std::stoi(name.substr(dash + 1))));
        // no duplicate electrodes
        std::set<std::string> uniq(p.electrodes.begin(), p.electrodes.end());
        CHECK(uniq.size() == p.electrodes.size());
        if (name != "distributed-19") ++rows;
    }
    CHECK(rows == 18);

    CHECK_THROWS_AS(preset("bogus-7"), ValidationError);
}

TEST_CASE("reduce and retrain recovers planted channels") {
    // class signal lives only on channels 2 and 5 of 8; the other channels
    // carry class-independent confuser oscillations
    SynthSpec spec = planted_synth_spec();
    TrialDataset all = synth(spec, 90, 7001);
    auto [fit, eval] = split_trials(all, 0.25, 1);

    ModelConfig c{8, 256, 8, 32, 2};
    TrainHyper h;
    h.epochs = 60;
    h.batch_size = 32;
    h.lr_schedule = {{0, 1e-3f}};
    h.seed = 1;
    h.workers = 4;

    ReduceResult r = reduce_and_retrain(fit, eval, 2, c, h);
    CHECK(r.reduced_config.n_ch == 2);
    CHECK(r.kept_channels.size() == 2);

    std::set<int> top3;
    for (int i = 0; i < 3; ++i) top3.insert(r.ranking.entries[i].index);
    CHECK(top3.count(2) + top3.count(5) == 2);

    CHECK(r.full_metrics.accuracy >= 0.85);
    CHECK(r.reduced_metrics.accuracy >= 0.9 * r.full_metrics.accuracy);

    CHECK_THROWS_AS(reduce_and_retrain(fit, eval, 0, c, h), ValidationError);
    CHECK_THROWS_AS(reduce_and_retrain(fit, eval, 9, c, h), ValidationError);
}

TEST_CASE("n_bar equal to n_ch keeps the task identical") {
    SynthSpec spec = default_synth_spec();
    TrialDataset all = synth(spec, 60, 13);
    auto [fit, eval] = split_trials(all, 0.25, 5);
    ModelConfig c{8, 256, 8, 32, 2};
    TrainHyper h;
    h.epochs = 25;
    h.seed = 2;
    ReduceResult r = reduce_and_retrain(fit, eval, 8, c, h);
    CHECK(r.kept_channels == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(std::abs(r.accuracy_delta) <= 0.15);  // same problem, training noise only
}

TEST_CASE("ranking kv export") {
    MatF w(1, 2);
    w << 1.0f, 2.0f;
    ChannelRanking r = rank_channels(w, {"C3", "C4"});
    std::string kv = r.kv();
    CHECK(kv.find("rank0.index=1") != std::string::npos);
    CHECK(kv.find("rank0.name=C4") != std::string::npos);
    CHECK(kv.find("rank1.name=C3") != std::string::npos);
}
