// End-to-end exercises of the command-line front end, spawning the real
// binary (path injected by the build).

#include "mibminet/dataio.hpp"
#include "mibminet/estimator.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

using namespace mibminet;

namespace {

namespace fs = std::filesystem;

struct CliRun {
    int exit_code = -1;
    std::string output;
};

CliRun run_cli(const std::string& args, const fs::path& workdir) {
    const std::string log = (workdir / "out.log").string();
    const std::string cmd = "cd " + workdir.string() + " && " + MIBMINET_CLI_PATH + " " + args +
                            " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("mibminet_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> parse_kv(const fs::path& p) {
    std::map<std::string, std::string> kv;
    std::ifstream is(p);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace

TEST_CASE("estimate prints the published totals and honors the budget") {
    TempDir dir;
    CliRun r = run_cli("estimate --nch 22 --ns 750 --nk 32 --nf 64 --ncl 4 --precision 8", dir.path);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("6084") != std::string::npos);
    CHECK(r.output.find("40500") != std::string::npos);
    CHECK(r.output.find("46584") != std::string::npos);
    CHECK(r.output.find("46.58 kB") != std::string::npos);

    CliRun over = run_cli(
        "estimate --nch 22 --ns 750 --nk 32 --nf 64 --ncl 4 --precision 32 --budget 65536",
        dir.path);
    CHECK(over.exit_code == 3);

    CliRun tiny = run_cli("estimate --nch 1 --ns 64 --nk 1 --nf 3 --ncl 2", dir.path);
    CHECK(tiny.exit_code == 0);

    CliRun bad = run_cli("estimate --nch 22", dir.path);
    CHECK(bad.exit_code == 2);

    CliRun invalid = run_cli("estimate --nch 0 --ns 750 --nk 32 --nf 64 --ncl 4", dir.path);
    CHECK(invalid.exit_code == 2);
}

TEST_CASE("missing input files exit with the IO code") {
    TempDir dir;
    CliRun r = run_cli("infer --qnet missing.mibq --data missing.mibt", dir.path);
    CHECK(r.exit_code == 4);
}

TEST_CASE("full pipeline: synth -> train -> select -> retrain -> quantize -> infer -> verify") {
    TempDir dir;

    CliRun synth = run_cli("synth-data --out all.mibt --trials-per-class 60 --seed 5", dir.path);
    REQUIRE(synth.exit_code == 0);
    CHECK(fs::exists(dir.path / "all.mibt.manifest.json"));

    CliRun eval = run_cli("synth-data --out eval.mibt --trials-per-class 20 --seed 6", dir.path);
    REQUIRE(eval.exit_code == 0);

    CliRun train1 = run_cli(
        "train --data all.mibt --val eval.mibt --out full.mibc --preset synthetic --seed 7 "
        "--epochs 25 --curve curve.txt",
        dir.path);
    REQUIRE(train1.exit_code == 0);
    CHECK(fs::exists(dir.path / "full.mibc.manifest.json"));
    CHECK(fs::exists(dir.path / "curve.txt"));

    // determinism: the same seed reproduces the checkpoint bitwise
    CliRun train2 = run_cli(
        "train --data all.mibt --val eval.mibt --out full2.mibc --preset synthetic --seed 7 "
        "--epochs 25",
        dir.path);
    REQUIRE(train2.exit_code == 0);
    CHECK(slurp(dir.path / "full.mibc") == slurp(dir.path / "full2.mibc"));

    CliRun select = run_cli(
        "select-channels --data all.mibt --checkpoint full.mibc --n-bar 2 "
        "--out-ranking ranking.txt --out-data reduced.mibt",
        dir.path);
    REQUIRE(select.exit_code == 0);
    CHECK(fs::exists(dir.path / "ranking.txt"));
    TrialDataset reduced = read_trials((dir.path / "reduced.mibt").string());
    CHECK(reduced.n_ch == 2);

    CliRun reval = run_cli(
        "select-channels --data eval.mibt --checkpoint full.mibc --n-bar 2 "
        "--out-data reduced_eval.mibt",
        dir.path);
    REQUIRE(reval.exit_code == 0);

    CliRun retrain = run_cli(
        "train --data reduced.mibt --val reduced_eval.mibt --out reduced.mibc "
        "--preset synthetic --nch 2 --seed 8 --epochs 25",
        dir.path);
    REQUIRE(retrain.exit_code == 0);

    // quantization-aware training through the CLI; t_end becomes the epoch count
    CliRun qat = run_cli(
        "train --data all.mibt --out qat.mibc --preset synthetic --seed 9 --qat 4,6,12",
        dir.path);
    REQUIRE(qat.exit_code == 0);
    CHECK(qat.output.find("12 epochs") != std::string::npos);

    CliRun quant = run_cli("quantize --checkpoint full.mibc --calib all.mibt --out full.mibq",
                           dir.path);
    REQUIRE(quant.exit_code == 0);

    CliRun infer = run_cli(
        "infer --qnet full.mibq --data eval.mibt --trace trace.txt --out preds.txt", dir.path);
    REQUIRE(infer.exit_code == 0);
    CHECK(infer.output.find("accuracy") != std::string::npos);

    // the trace MACC total equals the estimator's for the same config
    auto trace = parse_kv(dir.path / "trace.txt");
    ResourceReport report = estimate({8, 256, 8, 32, 2});
    CHECK(trace.at("macc_total") == std::to_string(report.macc_total));
    CHECK(trace.at("peak_memory_bytes") == std::to_string(report.memory_bytes(8)));

    CliRun verify = run_cli(
        "verify --qnet full.mibq --checkpoint full.mibc --data eval.mibt --out agree.txt",
        dir.path);
    REQUIRE(verify.exit_code == 0);
    CHECK(verify.output.find("agreement") != std::string::npos);
    CHECK(fs::exists(dir.path / "agree.txt"));

    // preset-based selection by electrode name fails cleanly on synthetic
    // channel names
    CliRun preset = run_cli("select-channels --data all.mibt --preset central-3", dir.path);
    CHECK(preset.exit_code == 2);
}

TEST_CASE("manifests are deterministic and carry the digest") {
    TempDir dir;
    CliRun a = run_cli("synth-data --out d1.mibt --trials-per-class 4 --seed 3", dir.path);
    REQUIRE(a.exit_code == 0);
    std::string manifest((std::istreambuf_iterator<char>(
                             *std::make_unique<std::ifstream>(dir.path / "d1.mibt.manifest.json"))),
                         std::istreambuf_iterator<char>());
    CHECK(manifest.find("config_digest") != std::string::npos);
    CHECK(manifest.find("synth-data") != std::string::npos);

    CliRun b = run_cli("synth-data --out d2.mibt --trials-per-class 4 --seed 3", dir.path);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir.path / "d1.mibt") == slurp(dir.path / "d2.mibt"));
}
