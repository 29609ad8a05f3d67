#pragma once

#include "sfwc/optim/steps.hpp"
#include "sfwc/regions/region.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sfwc {

/// min over the region of <v, g> by exhaustive enumeration: sign vertices for
/// the polytope, every support (or group subset) of size <= k with its exact
/// continuous minimiser for the k-support kinds, and the von Neumann bound
/// -τ·sqrt(σ_1² + ... + σ_k²) from svd_full for the spectral ball.
double brute_force_lmo_value(const FeasibleRegion &region, const Tensor &g);

struct LmoCase {
    RegionKind kind = RegionKind::KSupport;
    Shape shape;             // vector (dim) or matrix (rows, cols)
    std::size_t k = 1;
    std::size_t group_size = 2; // group kind only: contiguous groups
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
};

struct LmoReport {
    LmoCase spec;
    double max_gap = 0.0;            // max of <lmo(g), g> - brute force minimum
    double max_infeasibility = 0.0;  // max of gauge(v)/τ - 1
    std::size_t trials = 0;
    bool pass = false;
    std::string label() const;
};

inline constexpr double kLmoGapTolerance = 1e-10;

FeasibleRegion make_case_region(const LmoCase &c, double tau);
LmoReport verify_lmo(const LmoCase &c);
/// Every kind at dims up to 8 (matrices up to 4x5) and k up to 4.
std::vector<LmoCase> default_lmo_suite(std::size_t trials, std::uint64_t seed);

struct ConvergenceCheckOptions {
    /// Upper bounds the generated problem must certify (M, G, D, h0, β).
    ConvergenceExperimentSpec constants{};
    std::vector<std::size_t> horizons{100, 400};
    std::size_t seeds = 20;
    std::size_t samples = 200; // m
    std::size_t dim = 10;      // n
    double spread = 0.3;       // see aligned_least_squares_problem
    double target_noise = 0.1;
    std::uint64_t problem_seed = 0;
};

struct HorizonResult {
    std::size_t horizon = 0;
    double eta = 0.0;
    double bound = 0.0;
    /// Mean over seeds of the average of 𝒢(θ_t)·‖∇L(θ_t)‖ over t < T, i.e. the
    /// expectation over a uniformly drawn θ_a evaluated exactly for each run.
    double measured_mean = 0.0;
    /// Same quantity from a single θ_a per seed drawn from the noise stream.
    double sampled_mean = 0.0;
    double max_sample_grad = 0.0;   // largest per-sample gradient norm seen during the runs
    bool within_bound = false;
};

struct ConvergenceReport {
    double smoothness = 0.0;  // certified M of the instance
    double lipschitz = 0.0;   // certified G over the feasible ball
    double initial_gap = 0.0; // certified h0
    double diameter = 0.0;
    std::vector<HorizonResult> horizons;
    double ratio = 0.0; // measured mean at the first horizon over the last
    bool lipschitz_respected = false;
    bool pass = false;
};

inline constexpr double kRatioLow = 1.3;
inline constexpr double kRatioHigh = 3.0;

/// Stochastic Frank-Wolfe in theorem mode (η_t = η·‖∇_t‖, i.i.d. batches of
/// b = T samples) on a least-squares instance over an L2 ball of diameter D,
/// scaled so that its certified M, G and h0 do not exceed the requested ones.
ConvergenceReport convergence_check(const ConvergenceCheckOptions &options);

} // namespace sfwc
