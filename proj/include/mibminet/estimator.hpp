#pragma once

#include "mibminet/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mibminet {

/// Per-layer and total parameter / feature / MACC accounting for one config.
/// Memory footprint under the layer-by-layer schedule is the parameters plus
/// the biggest consecutive feature pair, at the chosen element width.
struct ResourceReport {
    ModelConfig config;
    std::vector<LayerStep> layers;
    int64_t params_total = 0;
    int64_t peak_feature_pair = 0;
    int64_t macc_total = 0;

    int64_t memory_bytes(int precision_bits) const;
};

ResourceReport estimate(const ModelConfig& config);

struct Budget {
    int64_t limit_bytes = 65536;  // fast L1 size of the reference MCU
};

struct BudgetCheck {
    bool fits = false;
    int64_t required_bytes = 0;
    int64_t margin_bytes = 0;  // negative when over budget
};

BudgetCheck check_budget(const ResourceReport& report, int precision_bits, const Budget& budget);

/// Reduction ratios of a over b. The memory ratio is taken on the peak
/// consecutive feature pair, the quantity the published configuration tables
/// reduce when channels are dropped.
struct ReductionRatios {
    double params = 0.0;
    double memory = 0.0;
    double macc = 0.0;
};

ReductionRatios compare(const ResourceReport& a, const ResourceReport& b);

// ---------------------------------------------------------------------------
// Published reference accounting. The reference tables for the two standard
// dataset configurations carry a few cells that are inconsistent with their
// own totals; the discrepancy report lists every cell where our floor-based
// arithmetic lands elsewhere, with the relative deviation.

struct ReferenceCell {
    std::string name;
    int64_t published = 0;
    int64_t computed = 0;

    double rel_deviation() const;
    bool matches() const { return published == computed; }
};

/// Known reference-table cells for "bci-iv2a" (22,750,32,64,4) or
/// "physionet-mmmi" (64,480,16,128,4). Throws ValidationError otherwise.
std::vector<ReferenceCell> reference_cells(const std::string& preset);

std::vector<ReferenceCell> reference_discrepancies(const std::string& preset);

// Rendering helpers: fixed-width table for humans, `key=value` lines for
// machines.
std::string report_table(const ResourceReport& report);
std::string report_kv(const ResourceReport& report);

}  // namespace mibminet
