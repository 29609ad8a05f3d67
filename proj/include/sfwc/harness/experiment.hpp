#pragma once

#include "sfwc/harness/config.hpp"
#include "sfwc/zoo/data.hpp"
#include "sfwc/zoo/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfwc {

struct DataSplits {
    Dataset train;
    Dataset test;
};

DataSplits build_datasets(const DatasetConfig &config);
/// Uninitialised model for the configured architecture and the data's sample shape.
Model build_model(const ModelConfig &config, const Dataset &train);

/// A weight tensor trained under a norm-ball constraint.
struct ConstrainedGroup {
    std::size_t weight_layer = 0; // ordinal among layers with a weight
    std::size_t layer = 0;        // index into Model::layers()
    std::size_t param = 0;        // index into Model::parameters()
    std::size_t entry = 0;        // region entry of the config
    FeasibleRegion region = FeasibleRegion::l2_ball({1}, 1.0);
    RadiusSpec radius;
};

/// Matches weight layers to region entries and sizes every region from the
/// mean initial norm. Throws ConfigError when a layer matches two entries.
std::vector<ConstrainedGroup> build_regions(const ExperimentConfig &config, const Model &model, std::uint64_t seed);

/// Weight layers (as ordinals) that receive the penalty or prox step.
std::vector<std::size_t> penalty_layers(const ExperimentConfig &config, const Model &model);

struct MetricsRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double grad_norm_mean = 0.0; // mean ‖batch gradient‖₂ over the epoch's steps
    double eff_lr_mean = 0.0;    // mean applied Frank-Wolfe rate, or the scheduled SGD rate
    double wall_s = 0.0;         // zero unless run.wall_time is set
};

inline constexpr std::string_view kMetricsHeader = "epoch,train_loss,train_acc,test_acc,grad_norm_mean,eff_lr_mean,wall_s";

void write_metrics_csv(std::ostream &out, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics_csv(std::istream &in);

/// One Frank-Wolfe update of one constrained group.
struct TraceRow {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::size_t group = 0;
    double eta = 0.0;
    double grad_norm = 0.0;
    double dir_norm = 0.0;
    double eff_lr = 0.0;
    bool skipped = false;
};

inline constexpr std::string_view kTraceHeader = "epoch,step,group,eta,grad_norm,dir_norm,eff_lr,skipped";

void write_trace_csv(std::ostream &out, std::span<const TraceRow> rows);
std::vector<TraceRow> read_trace_csv(std::istream &in);

struct RunFailure {
    std::string error;
    std::string message;
    std::size_t epoch = 0;
    std::size_t step = 0;
};

struct SeedRun {
    std::string config_id;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<MetricsRow> metrics;
    std::vector<TraceRow> trace; // filled only when run.trace is set
    std::vector<ConstrainedGroup> groups;
    Model model;
    std::vector<TradeoffRecord> tradeoff;
    double dense_train_acc = 0.0;
    double dense_test_acc = 0.0;
    double max_gauge_ratio = 0.0; // max over epochs and groups of gauge/τ
    std::size_t steps = 0;
    std::optional<RunFailure> failure;

    bool feasible() const noexcept { return max_gauge_ratio <= 1.0 + 1e-9; }
};

/// Trains one seed and runs the compression sweep. NonFiniteLoss is caught
/// and recorded in `failure`; the sweep is then skipped.
SeedRun run_seed(const ExperimentConfig &config, std::uint64_t seed);

Json seed_summary(const SeedRun &run);

/// metrics_seed{s}.csv, summary_seed{s}.json, snapshot_seed{s}.{bin,json},
/// trace_seed{s}.csv when traced, error_seed{s}.json on failure.
void write_seed_outputs(const std::filesystem::path &dir, const SeedRun &run);

/// Concatenates the tradeoff rows of `runs` into dir/tradeoff.csv (seed order as given).
void write_cell_tradeoff(const std::filesystem::path &dir, std::span<const SeedRun> runs);

struct ExperimentResult {
    std::filesystem::path dir;
    std::vector<SeedRun> runs;
    bool ok() const;
};

/// Runs every configured seed (or `seeds` when non-empty) and writes the cell
/// directory out/<config id>, including config.json.
ExperimentResult run_experiment(const ExperimentConfig &config, const std::filesystem::path &out,
                                std::span<const std::uint64_t> seeds = {});

/// Expands the grid and runs every (cell, seed) job, `threads` at a time. Output
/// bytes do not depend on `threads`.
std::vector<ExperimentResult> run_sweep(const Json &doc, const std::filesystem::path &out,
                                        std::span<const std::uint64_t> seeds = {}, std::size_t threads = 1);

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Every parameter as "<layer index>.<layer kind>.<param name>".
std::vector<NamedTensor> model_tensors(const Model &model);

/// Flat little-endian float64 container: the 8-byte magic "SFWCSNP1" then every
/// tensor's values back to back. The JSON manifest lists name, shape and offset
/// (in values) of each tensor.
void write_snapshot(const std::filesystem::path &bin, const std::filesystem::path &manifest,
                    std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_snapshot(const std::filesystem::path &bin, const std::filesystem::path &manifest);

} // namespace sfwc
