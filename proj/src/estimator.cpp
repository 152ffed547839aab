#include "mibminet/estimator.hpp"

#include <cmath>
#include <sstream>

namespace mibminet {

ResourceReport estimate(const ModelConfig& config) {
    LayerPlan plan = layer_plan(config);
    ResourceReport report;
    report.config = config;
    report.layers = plan.steps;
    report.params_total = plan.params_total();
    report.peak_feature_pair = plan.peak_feature_pair();
    report.macc_total = plan.macc_total();
    return report;
}

int64_t ResourceReport::memory_bytes(int precision_bits) const {
    if (precision_bits != 8 && precision_bits != 32)
        throw ValidationError("memory_bytes: precision must be 8 or 32 bits");
    return (precision_bits / 8) * (params_total + peak_feature_pair);
}

BudgetCheck check_budget(const ResourceReport& report, int precision_bits, const Budget& budget) {
    if (budget.limit_bytes <= 0) throw ValidationError("budget: limit must be positive");
    BudgetCheck check;
    check.required_bytes = report.memory_bytes(precision_bits);
    check.margin_bytes = budget.limit_bytes - check.required_bytes;
    check.fits = check.margin_bytes >= 0;
    return check;
}

ReductionRatios compare(const ResourceReport& a, const ResourceReport& b) {
    if (b.params_total == 0 || b.peak_feature_pair == 0 || b.macc_total == 0)
        throw ValidationError("compare: degenerate baseline report");
    ReductionRatios r;
    r.params = double(a.params_total) / double(b.params_total);
    r.memory = double(a.peak_feature_pair) / double(b.peak_feature_pair);
    r.macc = double(a.macc_total) / double(b.macc_total);
    return r;
}

double ReferenceCell::rel_deviation() const {
    if (published == 0) return computed == 0 ? 0.0 : 1.0;
    return std::abs(double(computed - published)) / std::abs(double(published));
}

namespace {

struct PublishedRow {
    const char* name;
    int64_t value;
};

std::vector<ReferenceCell> build_cells(const ModelConfig& config,
                                       const std::vector<PublishedRow>& published) {
    ResourceReport r = estimate(config);
    auto layer = [&](size_t i) -> const LayerStep& { return r.layers.at(i); };
    std::vector<ReferenceCell> cells;
    for (const auto& p : published) {
        std::string n = p.name;
        int64_t computed = 0;
        if (n == "input.features") computed = layer(0).in_features;
        else if (n == "phi1.features") computed = layer(0).out_features;
        else if (n == "phi2.features") computed = layer(1).out_features;
        else if (n == "phi3.features") computed = layer(2).out_features;
        else if (n == "phi4.features") computed = layer(3).out_features;
        else if (n == "phi1.params") computed = layer(0).params;
        else if (n == "phi2.params") computed = layer(1).params;
        else if (n == "phi3.params") computed = layer(2).params;
        else if (n == "phi4.params") computed = layer(3).params;
        else if (n == "phi1.macc") computed = layer(0).maccs;
        else if (n == "phi2.macc") computed = layer(1).maccs;
        else if (n == "phi3.macc") computed = layer(2).maccs;
        else if (n == "phi4.macc") computed = layer(3).maccs;
        else if (n == "params_total") computed = r.params_total;
        else if (n == "peak_feature_pair") computed = r.peak_feature_pair;
        else if (n == "macc_total") computed = r.macc_total;
        else if (n == "memory_bytes_8bit") computed = r.memory_bytes(8);
        else throw ValidationError("reference cell: unknown name " + n);
        cells.push_back({n, p.value, computed});
    }
    return cells;
}

}  // namespace

std::vector<ReferenceCell> reference_cells(const std::string& preset) {
    if (preset == "bci-iv2a") {
        ModelConfig config{22, 750, 32, 64, 4};
        return build_cells(config, {
            {"input.features", 16500}, {"phi1.features", 24000}, {"phi2.features", 3000},
            {"phi3.features", 176},    {"phi4.features", 4},     {"phi1.params", 832},
            {"phi2.params", 2176},     {"phi3.params", 1664},    {"phi4.params", 1412},
            {"phi1.macc", 528000},     {"phi2.macc", 1536000},   {"phi3.macc", 96000},
            {"phi4.macc", 704},        {"params_total", 6084},   {"peak_feature_pair", 40500},
            {"macc_total", 2209408},   {"memory_bytes_8bit", 46584},
        });
    }
    if (preset == "physionet-mmmi") {
        ModelConfig config{64, 480, 16, 128, 4};
        return build_cells(config, {
            {"input.features", 30720}, {"phi1.features", 7680},  {"phi2.features", 960},
            {"phi3.features", 112},    {"phi4.features", 4},     {"phi1.params", 1088},
            {"phi2.params", 2112},     {"phi3.params", 576},     {"phi4.params", 484},
            {"phi1.macc", 491520},     {"phi2.macc", 983040},    {"phi3.macc", 30720},
            {"phi4.macc", 448},        {"params_total", 4228},   {"peak_feature_pair", 38400},
            {"macc_total", 1505728},   {"memory_bytes_8bit", 42628},
        });
    }
    throw ValidationError("reference cells: unknown preset '" + preset + "'");
}

std::vector<ReferenceCell> reference_discrepancies(const std::string& preset) {
    std::vector<ReferenceCell> out;
    for (const auto& cell : reference_cells(preset))
        if (!cell.matches()) out.push_back(cell);
    return out;
}

std::string report_table(const ResourceReport& r) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-36s %10s %12s %12s %12s\n", "layer", "params",
                  "in_feat", "out_feat", "macc");
    os << line;
    std::snprintf(line, sizeof line, "%-36s %10s %12lld %12s %12s\n", "input", "-",
                  static_cast<long long>(r.layers.empty() ? 0 : r.layers.front().in_features), "-",
                  "-");
    os << line;
    for (const auto& s : r.layers) {
        std::snprintf(line, sizeof line, "%-36s %10lld %12lld %12lld %12lld\n", s.name.c_str(),
                      static_cast<long long>(s.params), static_cast<long long>(s.in_features),
                      static_cast<long long>(s.out_features), static_cast<long long>(s.maccs));
        os << line;
    }
    std::snprintf(line, sizeof line,
                  "total: params %lld | peak feature pair %lld | macc %lld\n",
                  static_cast<long long>(r.params_total),
                  static_cast<long long>(r.peak_feature_pair),
                  static_cast<long long>(r.macc_total));
    os << line;
    std::snprintf(line, sizeof line, "memory: 8-bit %lld B (%.2f kB) | 32-bit %lld B (%.2f kB)\n",
                  static_cast<long long>(r.memory_bytes(8)), r.memory_bytes(8) / 1000.0,
                  static_cast<long long>(r.memory_bytes(32)), r.memory_bytes(32) / 1000.0);
    os << line;
    return os.str();
}

std::string report_kv(const ResourceReport& r) {
    std::ostringstream os;
    os << "n_ch=" << r.config.n_ch << "\nn_s=" << r.config.n_s << "\nn_k=" << r.config.n_k
       << "\nn_f=" << r.config.n_f << "\nn_cl=" << r.config.n_cl << "\n";
    for (size_t i = 0; i < r.layers.size(); ++i) {
        const auto& s = r.layers[i];
        const std::string key = "layer" + std::to_string(i + 1);
        os << key << ".name=" << s.name << "\n";
        os << key << ".params=" << s.params << "\n";
        os << key << ".in_features=" << s.in_features << "\n";
        os << key << ".out_features=" << s.out_features << "\n";
        os << key << ".macc=" << s.maccs << "\n";
    }
    os << "params_total=" << r.params_total << "\n";
    os << "peak_feature_pair=" << r.peak_feature_pair << "\n";
    os << "macc_total=" << r.macc_total << "\n";
    os << "memory_bytes_8bit=" << r.memory_bytes(8) << "\n";
    os << "memory_bytes_32bit=" << r.memory_bytes(32) << "\n";
    return os.str();
}

}  // namespace mibminet
