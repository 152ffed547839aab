#include "mibminet/estimator.hpp"

#include <doctest.h>

using namespace mibminet;

TEST_CASE("published totals reproduce exactly") {
    ResourceReport bci = estimate({22, 750, 32, 64, 4});
    CHECK(bci.params_total == 6084);
    CHECK(bci.peak_feature_pair == 40500);
    CHECK(bci.memory_bytes(8) == 46584);
    CHECK(bci.memory_bytes(32) == 186336);

    ResourceReport physio = estimate({64, 480, 16, 128, 4});
    CHECK(physio.params_total == 4228);
    CHECK(physio.peak_feature_pair == 38400);
    CHECK(physio.macc_total == 1505728);
    CHECK(physio.memory_bytes(8) == 42628);

    ResourceReport reduced = estimate({10, 480, 16, 128, 2});
    CHECK(reduced.peak_feature_pair == 12480);
    CHECK(reduced.macc_total == 1090784);
    CHECK(reduced.params_total == 3138);
    CHECK(reduced.memory_bytes(8) == 15618);

    // 2-class subsets of the reference rows
    CHECK(estimate({22, 750, 32, 64, 2}).memory_bytes(8) == 45878);
    CHECK(estimate({6, 750, 32, 64, 2}).memory_bytes(8) == 33366);
}

TEST_CASE("per-layer counts match the materialized network tensors") {
    for (ModelConfig c : {ModelConfig{22, 750, 32, 64, 4}, ModelConfig{64, 480, 16, 128, 4},
                          ModelConfig{3, 64, 2, 5, 2}}) {
        ResourceReport r = estimate(c);
        Network net = build(c, 1);
        CHECK(r.params_total == net.parameter_count());
        CHECK(r.layers[0].params == net.spatial.weights.size() + 4 * net.bn1.features());
        CHECK(r.layers[1].params == net.temporal.weights.size() + 4 * net.bn2.features());
        CHECK(r.layers[2].params == net.sep_depthwise.weights.size() +
                                         net.pointwise.weights.size() + 4 * net.bn3.features());
        CHECK(r.layers[3].params == net.fc.weights.size() + net.fc.bias.size());
        ForwardStats stats;
        forward(net, MatF::Zero(c.n_ch, c.n_s), nullptr, &stats);
        CHECK(stats.maccs == r.macc_total);
    }
}

TEST_CASE("8-bit and 32-bit memory are exactly 4x apart") {
    Rng rng(13);
    for (int it = 0; it < 20; ++it) {
        ModelConfig c{1 + int(rng.below(30)), 64 + 8 * int(rng.below(60)), 1 + int(rng.below(32)),
                      1 + int(rng.below(64)), 2 + int(rng.below(4))};
        ResourceReport r = estimate(c);
        CHECK(r.memory_bytes(8) * 4 == r.memory_bytes(32));
        CHECK_THROWS_AS(r.memory_bytes(16), ValidationError);
    }
}

TEST_CASE("budget check") {
    ResourceReport bci = estimate({22, 750, 32, 64, 4});
    BudgetCheck ok = check_budget(bci, 8, Budget{65536});
    CHECK(ok.fits);
    CHECK(ok.margin_bytes == 18952);

    BudgetCheck no = check_budget(bci, 32, Budget{65536});
    CHECK(!no.fits);
    CHECK(no.required_bytes == 186336);

    ResourceReport zero;
    zero.config = ModelConfig{1, 64, 1, 3, 2};
    BudgetCheck empty = check_budget(zero, 8, Budget{65536});
    CHECK(empty.fits);
    CHECK(empty.margin_bytes == 65536);

    CHECK_THROWS_AS(check_budget(bci, 8, Budget{0}), ValidationError);
}

TEST_CASE("channel-reduction ratios bracket the published figures") {
    ResourceReport full = estimate({64, 480, 16, 128, 2});
    ResourceReport reduced = estimate({10, 480, 16, 128, 2});
    ReductionRatios r = compare(full, reduced);
    CHECK(r.params > 1.25);
    CHECK(r.params < 1.40);
    CHECK(r.memory > 3.0);
    CHECK(r.memory < 3.2);
    CHECK(r.macc > 1.35);
    CHECK(r.macc < 1.45);

    ReductionRatios unity = compare(full, full);
    CHECK(unity.params == doctest::Approx(1.0));
    CHECK(unity.memory == doctest::Approx(1.0));
    CHECK(unity.macc == doctest::Approx(1.0));

    // subject-8 style 6-channel BCI subset, both sides from the estimator
    ResourceReport bci_full = estimate({22, 750, 32, 64, 2});
    ResourceReport bci_s8 = estimate({6, 750, 32, 64, 2});
    ReductionRatios s8 = compare(bci_full, bci_s8);
    CHECK(s8.macc == doctest::Approx(double(bci_full.macc_total) / double(bci_s8.macc_total)));
    CHECK(bci_s8.macc_total == 1823552);  // 144000 + 1536000 + 142848 + 704
}

TEST_CASE("monotonicity in the channel count") {
    ModelConfig base{8, 128, 8, 16, 2};
    ResourceReport prev = estimate(base);
    for (int ch = 9; ch <= 16; ++ch) {
        ModelConfig c = base;
        c.n_ch = ch;
        ResourceReport r = estimate(c);
        CHECK(r.layers[0].params > prev.layers[0].params);
        CHECK(r.peak_feature_pair > prev.peak_feature_pair);
        CHECK(r.macc_total > prev.macc_total);
        prev = r;
    }
}

TEST_CASE("reference cells: exact set and documented deviations") {
    auto devs_bci = reference_discrepancies("bci-iv2a");
    // the three self-inconsistent feature/macc cells plus the total they skew
    CHECK(devs_bci.size() == 5);
    auto has = [&](const std::string& name) {
        for (const auto& d : devs_bci)
            if (d.name == name) return true;
        return false;
    };
    CHECK(has("phi3.features"));
    CHECK(has("phi3.macc"));
    CHECK(has("macc_total"));
    for (const auto& d : devs_bci)
        if (d.name == "macc_total") CHECK(d.rel_deviation() < 0.03);

    auto devs_ph = reference_discrepancies("physionet-mmmi");
    CHECK(devs_ph.size() == 1);
    CHECK(devs_ph[0].name == "phi4.params");
    CHECK(devs_ph[0].rel_deviation() < 0.07);

    // params totals and peak pairs are exact in both tables
    for (const auto& cell : reference_cells("bci-iv2a"))
        if (cell.name == "params_total" || cell.name == "peak_feature_pair" ||
            cell.name == "memory_bytes_8bit")
            CHECK(cell.matches());
    for (const auto& cell : reference_cells("physionet-mmmi"))
        if (cell.name == "params_total" || cell.name == "peak_feature_pair" ||
            cell.name == "macc_total")
            CHECK(cell.matches());

    CHECK_THROWS_AS(reference_cells("nope"), ValidationError);
}

TEST_CASE("report rendering carries the totals") {
    ResourceReport r = estimate({22, 750, 32, 64, 4});
    std::string table = report_table(r);
    CHECK(table.find("6084") != std::string::npos);
    CHECK(table.find("40500") != std::string::npos);
    CHECK(table.find("46.58 kB") != std::string::npos);
    std::string kv = report_kv(r);
    CHECK(kv.find("params_total=6084") != std::string::npos);
    CHECK(kv.find("memory_bytes_8bit=46584") != std::string::npos);
}
