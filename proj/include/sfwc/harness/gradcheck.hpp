#pragma once

#include "sfwc/harness/config.hpp"
#include "sfwc/zoo/data.hpp"
#include "sfwc/zoo/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sfwc {

inline constexpr double kModelGradTolerance = 1e-5;
inline constexpr double kQuadraticGradTolerance = 1e-8;

struct GradcheckReport {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Least-squares loss against its closed-form gradient.
GradcheckReport gradcheck_quadratic(std::uint64_t seed);
/// All parameters of `model` on the first `batch` samples of `data`.
GradcheckReport gradcheck_model(const std::string &name, const Model &model, const Dataset &data, std::uint64_t seed,
                                std::size_t batch = 16);
/// The configured model, initialised from `seed`, on its training data.
GradcheckReport gradcheck_config(const ExperimentConfig &config, std::uint64_t seed);
/// Quadratic, MLP and CNN (each with and without batchnorm) on small synthetic data.
std::vector<GradcheckReport> builtin_gradchecks(std::uint64_t seed);

} // namespace sfwc
