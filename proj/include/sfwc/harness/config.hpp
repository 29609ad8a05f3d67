#pragma once

#include "sfwc/compress/compress.hpp"
#include "sfwc/optim/steps.hpp"
#include "sfwc/regions/region.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sfwc {

using Json = nlohmann::json;

struct DatasetConfig {
    std::string kind = "two_moons"; // two_moons | blobs | bars | idx
    std::size_t n_train = 512;
    std::size_t n_test = 512;
    double noise = 0.1;
    std::uint64_t seed = 0;
    std::size_t classes = 2;
    std::size_t features = 2;
    double cluster_std = 1.0;
    double center_box = 10.0;
    std::size_t image_size = 8;
    std::string train_images, train_labels, test_images, test_labels;
};

struct ModelConfig {
    std::string kind = "mlp"; // mlp | cnn
    std::vector<std::size_t> hidden{100, 100};
    std::vector<std::size_t> channels{8, 16};
    std::size_t kernel = 3;
    bool batchnorm = false;
};

/// One region entry. `match` selects weight layers by type (all | dense | conv)
/// unless `layers` lists weight-layer positions explicitly.
struct RegionConfig {
    RegionKind kind = RegionKind::KSupport;
    double k_fraction = 0.1;
    std::optional<double> w;
    std::optional<double> tau;
    std::size_t init_samples = 10;
    std::string match = "all";
    std::vector<std::size_t> layers;
};

struct OptimizerConfig {
    OptimizerSettings settings; // horizon is filled in by the training loop
    /// Weight layers that receive the group/nuclear penalty or the prox step.
    std::string penalty_match = "all";
    std::optional<ConvergenceExperimentSpec> theorem;
};

struct CompressionConfig {
    CompressionMethod method = CompressionMethod::Magnitude;
    std::vector<double> targets{0.0, 0.5, 0.7, 0.8, 0.9, 0.95};
    std::string metric = "test_acc"; // test_acc | train_acc
};

struct RunConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::vector<std::uint64_t> seeds{0};
    std::string out = "runs";
    bool trace = false;
    bool wall_time = false;
};

struct SelectionConfig {
    std::string filter_metric = "train"; // train | test
    double drop_threshold = 0.05;
};

struct ExperimentConfig {
    std::string id = "experiment";
    std::string method_label; // tradeoff CSV "method"; defaults to a name derived from optimizer and region
    DatasetConfig dataset;
    ModelConfig model;
    OptimizerConfig optimizer;
    std::vector<RegionConfig> regions;
    CompressionConfig compression;
    RunConfig run;
    SelectionConfig selection;
    Json grid = Json::object();
    Json raw; // the document this config was parsed from

    std::string label() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const Json &doc);
ExperimentConfig load_config(const std::filesystem::path &path);

struct GridCell {
    std::string id;
    Json doc; // full config with the grid values applied and the grid removed
};

/// Cartesian product of the "grid" block (dotted path -> value list), keys in
/// sorted order, last key varying fastest. Without a grid the config is its own cell.
std::vector<GridCell> expand_grid(const Json &doc);

/// Sets a dotted path such as "region.k_fraction" (array regions get the value on every entry).
void set_dotted(Json &doc, const std::string &path, const Json &value);

} // namespace sfwc
