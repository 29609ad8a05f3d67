#include "sfwc/optim/steps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sfwc {

std::string_view method_name(Method m) noexcept {
    switch (m) {
    case Method::Sfw: return "sfw";
    case Method::Sgd: return "sgd";
    case Method::SgdGroupPenalty: return "sgd_group";
    case Method::SgdNuclear: return "sgd_nuclear";
    case Method::ProxGd: return "proxgd";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
    for (auto m : {Method::Sfw, Method::Sgd, Method::SgdGroupPenalty, Method::SgdNuclear, Method::ProxGd})
        if (method_name(m) == name)
            return m;
    return std::nullopt;
}

std::string_view schedule_name(Schedule s) noexcept { return s == Schedule::Constant ? "constant" : "linear"; }

std::optional<Schedule> parse_schedule(std::string_view name) noexcept {
    if (name == "constant")
        return Schedule::Constant;
    if (name == "linear" || name == "linear_decay")
        return Schedule::LinearDecay;
    return std::nullopt;
}

std::string_view rescale_name(RescaleMode r) noexcept {
    switch (r) {
    case RescaleMode::None: return "none";
    case RescaleMode::Diameter: return "diameter";
    case RescaleMode::Gradient: return "gradient";
    case RescaleMode::GradientTheory: return "gradient_theory";
    }
    return "unknown";
}

std::optional<RescaleMode> parse_rescale(std::string_view name) noexcept {
    for (auto r : {RescaleMode::None, RescaleMode::Diameter, RescaleMode::Gradient, RescaleMode::GradientTheory})
        if (rescale_name(r) == name)
            return r;
    return std::nullopt;
}

Tensor momentum_update(const Tensor &m, const Tensor &g, double rho, std::size_t t) {
    require_same_shape(m, g, "momentum_update");
    if (t == 0 || rho == 0.0)
        return g;
    Tensor out(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = rho * m[i] + (1.0 - rho) * g[i];
    return out;
}

double rescale_lr(RescaleMode mode, double eta, double grad_norm, double dir_norm, double diameter) {
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    switch (mode) {
    case RescaleMode::None:
        return clamp01(eta);
    case RescaleMode::Diameter:
        if (!(diameter > 0.0))
            throw Error(Errc::DegenerateDirection, "diameter rescaling needs D > 0");
        return clamp01(eta / diameter);
    case RescaleMode::Gradient:
        if (!(dir_norm > 0.0))
            throw Error(Errc::DegenerateDirection, "‖v - θ‖ is zero");
        return clamp01(eta * grad_norm / dir_norm);
    case RescaleMode::GradientTheory:
        return clamp01(eta * grad_norm);
    }
    return 0.0;
}

double lr_schedule(Schedule kind, std::size_t t, std::size_t horizon, double eta0) {
    if (t >= horizon)
        throw Error(Errc::HorizonExceeded, "step " + std::to_string(t) + " >= horizon " + std::to_string(horizon));
    if (kind == Schedule::Constant)
        return eta0;
    return eta0 * (1.0 - static_cast<double>(t) / static_cast<double>(horizon));
}

Tensor fw_update(const Tensor &theta, const Tensor &v, double eta) { return lerp(theta, v, eta); }

SfwStepResult sfw_step(OptimizerState &state, std::size_t group, const Tensor &theta, const FeasibleRegion &region,
                       const Tensor &g) {
    const auto &cfg = state.settings;
    if (state.buffers.size() <= group)
        state.buffers.resize(group + 1);
    Tensor &buf = state.buffers[group];
    if (buf.shape() != g.shape())
        buf = Tensor(g.shape());
    buf = momentum_update(buf, g, cfg.momentum, state.t);

    SfwStepResult r;
    const Tensor v = lmo(region, buf, cfg.svd);
    r.eta = lr_schedule(cfg.schedule, state.t, cfg.horizon, cfg.eta0);
    r.grad_norm = norm2(g);
    double d2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - theta[i];
        d2 += d * d;
    }
    r.dir_norm = std::sqrt(d2);
    if (cfg.rescale == RescaleMode::Gradient && r.dir_norm == 0.0) {
        r.skipped = true;
        r.theta = theta;
        return r;
    }
    r.eff_lr = rescale_lr(cfg.rescale, r.eta, r.grad_norm, r.dir_norm, region.diameter());
    r.theta = fw_update(theta, v, r.eff_lr);
    return r;
}

Tensor sgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay) {
    require_same_shape(theta, g, "sgd_step");
    Tensor out(theta.shape());
    for (std::size_t i = 0; i < theta.size(); ++i)
        out[i] = theta[i] - eta * (g[i] + weight_decay * theta[i]);
    return out;
}

Tensor sgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay, Tensor &buffer, double rho,
                std::size_t t) {
    require_same_shape(theta, g, "sgd_step");
    if (buffer.shape() != theta.shape())
        buffer = Tensor(theta.shape());
    Tensor out(theta.shape());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double d = g[i] + weight_decay * theta[i];
        buffer[i] = (t == 0) ? d : rho * buffer[i] + d;
        out[i] = theta[i] - eta * buffer[i];
    }
    return out;
}

Tensor group_penalty_grad(const Tensor &theta, const GroupPartition &groups, double lambda) {
    const auto norms = group_norms(theta.data(), groups);
    Tensor out(theta.shape());
    if (lambda == 0.0)
        return out;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        if (norms[gi] == 0.0)
            continue;
        const double scale = lambda / norms[gi];
        for (auto i : groups[gi])
            out[i] = scale * theta[i];
    }
    return out;
}

Tensor nuclear_subgradient(const Tensor &a, double lambda) {
    const Tensor mat = matrix_view(a);
    Tensor out(mat.shape());
    if (lambda == 0.0 || norm_inf(mat) == 0.0)
        return out.reshaped(a.shape());
    const auto f = svd_full(mat);
    const double cutoff = 1e-12 * f.sigma[0];
    for (std::size_t p = 0; p < f.sigma.size(); ++p) {
        if (!(f.sigma[p] > cutoff))
            break;
        for (std::size_t i = 0; i < mat.rows(); ++i) {
            const double ui = lambda * f.u(i, p);
            for (std::size_t j = 0; j < mat.cols(); ++j)
                out(i, j) += ui * f.v(j, p);
        }
    }
    return out.reshaped(a.shape());
}

Tensor svt(const Tensor &a, double threshold) {
    if (threshold < 0.0)
        throw Error(Errc::ConfigError, "svt threshold must be non-negative");
    const Tensor mat = matrix_view(a);
    auto f = svd_full(mat);
    for (auto &s : f.sigma)
        s = std::max(0.0, s - threshold);
    return f.reconstruct().reshaped(a.shape());
}

Tensor proxgd_step(const Tensor &theta, const Tensor &g, double eta, double weight_decay, double lambda) {
    return svt(sgd_step(theta, g, eta, weight_decay), eta * lambda);
}

double fw_gap(const Tensor &theta, const Tensor &exact_grad, const FeasibleRegion &region,
              const PowerIterationOptions &svd_options) {
    if (gauge(region, theta) > region.tau() * (1.0 + 1e-9))
        throw Error(Errc::InfeasiblePoint, "fw_gap: θ lies outside the region");
    const Tensor v = lmo(region, exact_grad, svd_options);
    double gap = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        gap += (theta[i] - v[i]) * exact_grad[i];
    return std::max(gap, 0.0);
}

TheoremSchedule theorem_schedule(const ConvergenceExperimentSpec &spec) {
    const double m = spec.smoothness, g = spec.lipschitz, d = spec.diameter, h0 = spec.initial_gap;
    if (!(m > 0.0 && g > 0.0 && d > 0.0 && h0 >= 0.0) || spec.horizon == 0)
        throw Error(Errc::ConfigError, "theorem constants must be positive and T >= 1");
    const double bound = 2.0 * h0 / (m * d * d);
    if (spec.beta < bound)
        throw Error(Errc::InvalidBeta,
                    "beta=" + std::to_string(spec.beta) + " below 2h0/(MD^2)=" + std::to_string(bound));
    const double t = static_cast<double>(spec.horizon);
    return {std::sqrt(h0 / (t * m * d * d * g * g * spec.beta)), spec.horizon};
}

double theorem_bound(const ConvergenceExperimentSpec &spec) {
    const double m = spec.smoothness, g = spec.lipschitz, d = spec.diameter, h0 = spec.initial_gap;
    const double t = static_cast<double>(spec.horizon);
    return d / std::sqrt(t) *
           (std::sqrt(h0 * m * g * g * spec.beta) + g * g + m * g * d / (2.0 * std::numbers::sqrt2));
}

} // namespace sfwc
