#pragma once

#include "sfwc/numerics/linalg.hpp"
#include "sfwc/regions/region.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace sfwc {

enum class Method { Sfw, Sgd, SgdGroupPenalty, SgdNuclear, ProxGd };
enum class Schedule { Constant, LinearDecay };
enum class RescaleMode { None, Diameter, Gradient, GradientTheory };

std::string_view method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;
std::string_view schedule_name(Schedule s) noexcept;
std::optional<Schedule> parse_schedule(std::string_view name) noexcept;
std::string_view rescale_name(RescaleMode r) noexcept;
std::optional<RescaleMode> parse_rescale(std::string_view name) noexcept;

struct OptimizerSettings {
    Method method = Method::Sfw;
    double eta0 = 0.1;
    Schedule schedule = Schedule::LinearDecay;
    RescaleMode rescale = RescaleMode::Gradient;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double penalty = 0.0;
    /// Total number of steps, used by the linear-decay schedule.
    std::size_t horizon = 1;
    PowerIterationOptions svd{};
};

/// One momentum buffer per parameter group plus the shared step counter.
struct OptimizerState {
    OptimizerSettings settings;
    std::vector<Tensor> buffers;
    std::size_t t = 0;
};

/// t = 0 -> g; otherwise rho·m + (1 - rho)·g.
Tensor momentum_update(const Tensor &m, const Tensor &g, double rho, std::size_t t);

/// Effective step size, clamped to [0, 1]. Gradient mode throws
/// DegenerateDirection when dir_norm is zero.
double rescale_lr(RescaleMode mode, double eta, double grad_norm, double dir_norm, double diameter);

/// constant -> eta0, linear decay -> eta0·(1 - t/T). Throws HorizonExceeded for t >= T.
double lr_schedule(Schedule kind, std::size_t t, std::size_t horizon, double eta0);

/// (1 - eta)·theta + eta·v
Tensor fw_update(const Tensor &theta, const Tensor &v, double eta);

struct SfwStepResult {
    Tensor theta;
    double eta = 0.0;       // scheduled rate before rescaling
    double eff_lr = 0.0;    // rate actually applied
    double grad_norm = 0.0; // ‖g‖₂ of the raw batch gradient
    double dir_norm = 0.0;  // ‖v - θ‖₂
    bool skipped = false;   // v == θ in gradient mode
};

/// One Frank-Wolfe step for parameter group `group`: updates its momentum
/// buffer, calls the LMO on it and takes the convex combination. Does not
/// advance state.t.
SfwStepResult sfw_step(OptimizerState &state, std::size_t group, const Tensor &theta, const FeasibleRegion &region,
                       const Tensor &g);

/// θ - η·(g + λ₀θ) with no momentum.
Tensor sgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay);
/// Heavy-ball variant: buf <- g + λ₀θ at t = 0, else rho·buf + g + λ₀θ; θ - η·buf.
Tensor sgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay, Tensor &buffer, double rho,
                std::size_t t);

/// Gradient of λ₁·Σ_i ‖θ_i‖₂ over the groups, zero on zero groups.
Tensor group_penalty_grad(const Tensor &theta, const GroupPartition &groups, double lambda);

/// λ·U·Vᵀ restricted to singular values above 1e-12·σ₁. The tensor is viewed as
/// a (shape[0] x rest) matrix and the result has the input's shape.
Tensor nuclear_subgradient(const Tensor &a, double lambda);

/// Σ u_i·max(0, σ_i - threshold)·v_iᵀ, same matrix view as above.
Tensor svt(const Tensor &a, double threshold);

/// sgd_step followed by svt with threshold η·λ₁.
Tensor proxgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay, double lambda);

/// Frank-Wolfe gap <v̂ - θ, -∇L(θ)> with v̂ = lmo(∇L(θ)). Throws InfeasiblePoint
/// when θ lies outside the region by more than 1e-9·τ.
double fw_gap(const Tensor &theta, const Tensor &exact_grad, const FeasibleRegion &region,
              const PowerIterationOptions &svd_options = {});

struct ConvergenceExperimentSpec {
    double smoothness = 1.0;   // M
    double lipschitz = 1.0;    // G
    double diameter = 1.0;     // D
    double initial_gap = 1.0;  // h0 >= L(θ0) - L*
    double beta = 2.0;
    std::size_t horizon = 100; // T
};

struct TheoremSchedule {
    double eta = 0.0;
    std::size_t batch = 0;
};

/// η = sqrt(h0 / (T·M·D²·G²·β)) and b = T. Throws InvalidBeta when β < 2h0/(MD²).
TheoremSchedule theorem_schedule(const ConvergenceExperimentSpec &spec);

/// D/√T·(sqrt(h0·M·G²·β) + G² + M·G·D/(2√2)).
double theorem_bound(const ConvergenceExperimentSpec &spec);

} // namespace sfwc
