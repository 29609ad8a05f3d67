#pragma once

#include "sfwc/zoo/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sfwc {

enum class CompressionMethod { Magnitude, Filter, LowRank };

std::string_view compression_name(CompressionMethod m) noexcept;
std::optional<CompressionMethod> parse_compression(std::string_view name) noexcept;

/// floor(fraction·total), tolerant to the representation error of decimal fractions.
std::size_t budget_count(double fraction, std::size_t total);

struct LayerSparsity {
    std::size_t layer = 0;
    std::size_t total = 0; // prunable weights (magnitude), filters (filter), weights before (lowrank)
    std::size_t zeroed = 0;
    std::size_t rank = 0;  // lowrank only
};

struct SparsityReport {
    std::size_t prunable_total = 0;
    std::size_t selected = 0; // weights / filters chosen by the operator
    std::size_t zeros = 0;    // zero prunable weights after compression
    double achieved = 0.0;    // zeros/prunable_total, filter fraction, or parameter reduction
    std::size_t params_before = 0;
    std::size_t params_after = 0;
    std::vector<LayerSparsity> layers;
};

struct Compressed {
    Model model;
    SparsityReport report;
};

/// Zeroes floor(s·P) prunable weights pooled over all layers, smallest |w|
/// first, ties by (layer, flat index).
Compressed magnitude_prune_global(const Model &model, double sparsity);

/// Zeroes floor(f·n) filters of smallest L1 norm in every conv layer (ties:
/// lowest filter index). Shapes are kept; params_after counts the survivors.
Compressed filter_prune_local(const Model &model, double fraction);

struct RankSelection {
    std::vector<std::size_t> layers; // indices of conv layers
    std::vector<std::size_t> ranks;
    std::size_t params_before = 0;
    std::size_t params_after = 0;
    double reduction = 0.0;
};

/// t = clamp(floor((1 - s)·n·m / (m + n)), 1, min(n, m)) for an (n x m) matrix.
std::size_t rank_for_reduction(std::size_t n, std::size_t m, double reduction);
/// One rank per conv layer, viewing weights as (n x c·d²).
RankSelection select_ranks(const Model &model, double reduction);

/// Conv: (t filters, c channels, d x d) followed by (n filters, t channels, 1 x 1)
/// carrying the original bias. Dense: (Σ_t V_tᵀ, no bias) then (U_t, bias).
std::pair<Layer, Layer> decompose_layer(const Layer &layer, std::size_t t);

/// Decomposes every conv layer at the rank chosen by select_ranks. A zero
/// target returns the model untouched.
Compressed lowrank_compress(const Model &model, double reduction);

Compressed compress(const Model &model, CompressionMethod method, double target);

struct TradeoffRecord {
    std::string method;
    std::string config_id;
    std::uint64_t seed = 0;
    double target = 0.0;
    double achieved = 0.0;
    double metric_pre = 0.0;
    double metric_post = 0.0;
};

using ModelEvaluator = std::function<double(const Model &)>;

/// One record per target; every target compresses a fresh copy of `model`.
std::vector<TradeoffRecord> sweep(const Model &model, CompressionMethod method, std::span<const double> targets,
                                  const ModelEvaluator &evaluator, const std::string &method_label = {},
                                  const std::string &config_id = {}, std::uint64_t seed = 0);

inline constexpr std::string_view kTradeoffHeader = "method,config_id,seed,target,achieved,metric_pre,metric_post";

void write_tradeoff_csv(std::ostream &out, std::span<const TradeoffRecord> records);
std::vector<TradeoffRecord> read_tradeoff_csv(std::istream &in);

/// Shortest decimal text that round-trips through strtod.
std::string format_number(double v);

} // namespace sfwc
