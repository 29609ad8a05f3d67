#pragma once

#include "sfwc/compress/compress.hpp"
#include "sfwc/harness/config.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfwc {

struct ConfigScore {
    std::string method;
    std::string config_id;
    double mean_post = 0.0; // mean over targets of the seed-averaged metric_post
    std::optional<double> dense_acc;
    bool passes_filter = false;
};

struct MethodSelection {
    std::string method;
    std::optional<ConfigScore> filtered;
    ConfigScore unfiltered;
    std::vector<ConfigScore> candidates; // sorted by config id
};

/// Per method, the config maximising mean metric_post, with and without the
/// dense-drop filter (dense accuracy more than `threshold` below `reference`
/// is excluded; configs missing from `dense_acc` never pass). Ties go to the
/// lexicographically smallest config id, so the result does not depend on row
/// order. Throws ConfigError when the configs of a method use different targets.
std::vector<MethodSelection> grid_select(std::span<const TradeoffRecord> rows,
                                         const std::map<std::string, double> &dense_acc, double reference,
                                         double threshold = 0.05);

struct SweepScan {
    std::vector<TradeoffRecord> rows;
    std::map<std::string, double> dense_train; // seed-mean dense accuracy per config id
    std::map<std::string, double> dense_test;
};

/// Reads tradeoff.csv and summary_seed*.json of every cell directory below `root`.
SweepScan scan_sweep(const std::filesystem::path &root);

Json selection_json(std::span<const MethodSelection> selections, double reference, double threshold,
                    const std::string &filter_metric);

} // namespace sfwc
