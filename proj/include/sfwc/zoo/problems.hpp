#pragma once

#include "sfwc/numerics/rng.hpp"
#include "sfwc/numerics/tensor.hpp"
#include "sfwc/zoo/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sfwc {

/// L(θ) = (1/m)·Σ_i ½(x_iᵀθ - y_i)².
class LeastSquaresProblem {
public:
    LeastSquaresProblem(Tensor features, std::vector<double> targets);

    std::size_t samples() const noexcept { return targets_.size(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    const Tensor &features() const noexcept { return features_; }
    const std::vector<double> &targets() const noexcept { return targets_; }

    double loss(const Tensor &theta) const;
    double sample_loss(const Tensor &theta, std::size_t i) const;
    Tensor gradient(const Tensor &theta) const;
    Tensor sample_gradient(const Tensor &theta, std::size_t i) const;
    /// Mean of per-sample gradients over `batch` (indices may repeat).
    Tensor batch_gradient(const Tensor &theta, std::span<const std::size_t> batch) const;

    /// Largest eigenvalue of (1/m)·XᵀX, from the singular values of X.
    double smoothness() const;
    /// sup over ‖θ‖₂ <= radius of max_i ‖∇ℓ_i(θ)‖ = max_i ‖x_i‖(‖x_i‖·radius + |y_i|).
    double lipschitz_bound(double radius) const;

    /// Copy with features and targets multiplied by `alpha` (all constants scale accordingly).
    LeastSquaresProblem scaled(double alpha) const;

private:
    Tensor features_;
    std::vector<double> targets_;
};

/// Seeded instance: rows of X drawn N(0, 1/n) per entry, y = X·θ* + 0.1·noise
/// with θ* ~ N(0, 1).
LeastSquaresProblem least_squares_problem(std::uint64_t seed, std::size_t samples, std::size_t dim);

/// Rows x_i = e_1 + spread·N(0, I/n) and targets y_i = 1 + target_noise·N(0, 1).
/// Per-sample gradients share a dominant direction, so the mean gradient stays
/// comparable to the Lipschitz bound.
LeastSquaresProblem aligned_least_squares_problem(std::uint64_t seed, std::size_t samples, std::size_t dim,
                                                  double spread = 0.3, double target_noise = 0.1);

struct GradCheckOptions {
    double eps = 1e-5;
    std::size_t min_coords = 64;
    /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
    /// Components below the floor are effectively checked to an absolute
    /// 1e-5·floor, which stays above the roundoff of a central difference
    /// (about 1e-11 for losses of order one at eps = 1e-5).
    double floor = 1e-4;
    std::uint64_t seed = 0;
};

/// Max relative error between `analytic` and central differences of `loss`
/// over a random coordinate subset (all coordinates if there are fewer than min_coords).
double finite_diff_check(const std::function<double(const Tensor &)> &loss, const Tensor &theta,
                         const Tensor &analytic, const GradCheckOptions &options = {});

/// Same check over all parameters of a model, flattened in parameter order.
double model_gradcheck(const Model &model, const Tensor &inputs, std::span<const std::size_t> labels,
                       const GradCheckOptions &options = {});

} // namespace sfwc
