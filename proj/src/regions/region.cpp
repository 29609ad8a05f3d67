#include "sfwc/regions/region.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace sfwc {

std::string_view region_kind_name(RegionKind kind) noexcept {
    switch (kind) {
    case RegionKind::L2Ball: return "l2_ball";
    case RegionKind::KSparsePolytope: return "k_sparse_polytope";
    case RegionKind::KSupport: return "k_support";
    case RegionKind::GroupKSupport: return "group_k_support";
    case RegionKind::SpectralKSupport: return "spectral_k_support";
    }
    return "unknown";
}

std::optional<RegionKind> parse_region_kind(std::string_view name) noexcept {
    if (name == "l2_ball" || name == "l2")
        return RegionKind::L2Ball;
    if (name == "k_sparse_polytope" || name == "polytope")
        return RegionKind::KSparsePolytope;
    if (name == "k_support" || name == "ksupport")
        return RegionKind::KSupport;
    if (name == "group_k_support" || name == "group")
        return RegionKind::GroupKSupport;
    if (name == "spectral_k_support" || name == "spectral")
        return RegionKind::SpectralKSupport;
    return std::nullopt;
}

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw Error(Errc::ConfigError, "region radius must be positive and finite");
}

void check_k(std::size_t k, std::size_t limit, const char *what) {
    if (k < 1 || k > limit)
        throw Error(Errc::BudgetExceedsDimension, std::string(what) + ": k=" + std::to_string(k) +
                                                      " outside [1, " + std::to_string(limit) + "]");
}

void check_shape(const FeasibleRegion &region, const Tensor &t) {
    if (t.shape() != region.shape())
        throw Error(Errc::ShapeMismatch, "region over " + shape_string(region.shape()) + " got tensor " +
                                             shape_string(t.shape()));
}

} // namespace

FeasibleRegion FeasibleRegion::l2_ball(Shape shape, double tau) {
    check_tau(tau);
    FeasibleRegion r;
    r.kind_ = RegionKind::L2Ball;
    r.tau_ = tau;
    r.shape_ = std::move(shape);
    r.k_ = shape_size(r.shape_);
    return r;
}

FeasibleRegion FeasibleRegion::k_sparse_polytope(Shape shape, std::size_t k, double tau) {
    check_tau(tau);
    check_k(k, shape_size(shape), "k_sparse_polytope");
    FeasibleRegion r;
    r.kind_ = RegionKind::KSparsePolytope;
    r.tau_ = tau;
    r.k_ = k;
    r.shape_ = std::move(shape);
    return r;
}

FeasibleRegion FeasibleRegion::k_support(Shape shape, std::size_t k, double tau) {
    check_tau(tau);
    check_k(k, shape_size(shape), "k_support");
    FeasibleRegion r;
    r.kind_ = RegionKind::KSupport;
    r.tau_ = tau;
    r.k_ = k;
    r.shape_ = std::move(shape);
    return r;
}

FeasibleRegion FeasibleRegion::group_k_support(Shape shape, GroupPartition groups, std::size_t k, double tau) {
    check_tau(tau);
    validate_partition(groups, shape_size(shape));
    check_k(k, groups.size(), "group_k_support");
    FeasibleRegion r;
    r.kind_ = RegionKind::GroupKSupport;
    r.tau_ = tau;
    r.k_ = k;
    r.shape_ = std::move(shape);
    r.groups_ = std::move(groups);
    return r;
}

FeasibleRegion FeasibleRegion::spectral_k_support(Shape shape, std::size_t k, double tau) {
    check_tau(tau);
    if (shape.empty() || shape_size(shape) == 0)
        throw Error(Errc::ShapeMismatch, "spectral_k_support needs a non-empty tensor");
    FeasibleRegion r;
    r.kind_ = RegionKind::SpectralKSupport;
    r.tau_ = tau;
    r.rows_ = shape[0];
    r.cols_ = shape_size(shape) / shape[0];
    check_k(k, std::min(r.rows_, r.cols_), "spectral_k_support");
    r.k_ = k;
    r.shape_ = std::move(shape);
    return r;
}

double FeasibleRegion::diameter() const noexcept {
    if (kind_ == RegionKind::KSparsePolytope)
        return 2.0 * tau_ * std::sqrt(static_cast<double>(k_));
    return 2.0 * tau_;
}

FeasibleRegion FeasibleRegion::with_tau(double tau) const {
    check_tau(tau);
    FeasibleRegion r = *this;
    r.tau_ = tau;
    return r;
}

double k_support_norm(std::span<const double> x, std::size_t k) {
    const std::size_t n = x.size();
    check_k(k, n, "k_support_norm");
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = std::abs(x[i]);
    std::sort(z.begin(), z.end(), std::greater<>());

    // z is 0-based here: z_j (1-based) == z[j-1]; z_0 is +inf.
    auto zz = [&](std::size_t j) { return j == 0 ? std::numeric_limits<double>::infinity() : z[j - 1]; };
    std::vector<double> tail(n + 2, 0.0); // tail[j] = sum_{i>=j} z_i, 1-based
    for (std::size_t j = n; j >= 1; --j)
        tail[j] = tail[j + 1] + z[j - 1];

    constexpr double slack = 1e-12;
    std::size_t chosen = k; // sentinel
    for (std::size_t r = 0; r < k; ++r) {
        const double mean = tail[k - r] / static_cast<double>(r + 1);
        if (zz(k - r - 1) >= mean * (1.0 - slack) && mean >= zz(k - r) * (1.0 - slack)) {
            chosen = r;
            break;
        }
    }
    if (chosen == k)
        chosen = k - 1; // unreachable for finite input; r = k-1 is the L1-like end
    double head = 0.0;
    for (std::size_t j = 1; j + chosen + 1 <= k; ++j)
        head += z[j - 1] * z[j - 1];
    const double t = tail[k - chosen];
    return std::sqrt(head + t * t / static_cast<double>(chosen + 1));
}

namespace {

Tensor scaled_restriction(const Tensor &g, const std::vector<std::size_t> &support, double tau) {
    Tensor v(g.shape());
    double s = 0.0;
    for (auto i : support)
        s += g[i] * g[i];
    if (s == 0.0)
        return v;
    const double scale = -tau / std::sqrt(s);
    for (auto i : support)
        v[i] = scale * g[i];
    return v;
}

} // namespace

Tensor lmo(const FeasibleRegion &region, const Tensor &g, const PowerIterationOptions &svd_options) {
    check_shape(region, g);
    const double tau = region.tau();
    switch (region.kind()) {
    case RegionKind::L2Ball: {
        const double nrm = norm2(g);
        if (nrm == 0.0)
            return Tensor(g.shape());
        return (-tau / nrm) * g;
    }
    case RegionKind::KSparsePolytope: {
        Tensor v(g.shape());
        for (auto i : topk_indices(g.data(), region.k())) {
            if (g[i] > 0.0)
                v[i] = -tau;
            else if (g[i] < 0.0)
                v[i] = tau;
        }
        return v;
    }
    case RegionKind::KSupport:
        return scaled_restriction(g, topk_indices(g.data(), region.k()), tau);
    case RegionKind::GroupKSupport: {
        const auto norms = group_norms(g.data(), region.groups());
        std::vector<std::size_t> support;
        for (auto gi : topk_indices(norms, region.k()))
            support.insert(support.end(), region.groups()[gi].begin(), region.groups()[gi].end());
        std::sort(support.begin(), support.end());
        return scaled_restriction(g, support, tau);
    }
    case RegionKind::SpectralKSupport: {
        if (norm_inf(g) == 0.0)
            return Tensor(g.shape());
        const Tensor mat = g.reshaped({region.matrix_rows(), region.matrix_cols()});
        SvdFactors f;
        try {
            f = svd_topk(mat, region.k(), svd_options);
        } catch (const PowerIterationStalled &stalled) {
            f = stalled.best();
        }
        const double s = norm2(f.sigma);
        if (s == 0.0)
            return Tensor(g.shape());
        Tensor w = f.reconstruct();
        w *= -tau / s;
        return w.reshaped(g.shape());
    }
    }
    return Tensor(g.shape());
}

double gauge(const FeasibleRegion &region, const Tensor &x) {
    check_shape(region, x);
    switch (region.kind()) {
    case RegionKind::L2Ball:
        return norm2(x);
    case RegionKind::KSparsePolytope:
        return std::max(norm_inf(x), norm1(x) / static_cast<double>(region.k()));
    case RegionKind::KSupport:
        return k_support_norm(x.data(), region.k());
    case RegionKind::GroupKSupport:
        return k_support_norm(group_norms(x.data(), region.groups()), region.k());
    case RegionKind::SpectralKSupport: {
        const auto f = svd_full(x.reshaped({region.matrix_rows(), region.matrix_cols()}));
        return k_support_norm(f.sigma, region.k());
    }
    }
    return 0.0;
}

double radius_from_diameter(RegionKind kind, double diameter, std::size_t k) {
    if (!(diameter > 0.0))
        throw Error(Errc::ConfigError, "diameter must be positive");
    if (kind == RegionKind::KSparsePolytope) {
        if (k < 1)
            throw Error(Errc::BudgetExceedsDimension, "k must be at least 1");
        return diameter / (2.0 * std::sqrt(static_cast<double>(k)));
    }
    return diameter / 2.0;
}

std::size_t resolve_k(double fraction, std::size_t dimension) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw Error(Errc::ConfigError, "fractional k must lie in (0, 1]");
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dimension)));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(dimension, 1));
}

std::size_t fan_in(const Shape &shape) noexcept {
    if (shape.size() <= 1)
        return shape.empty() ? 1 : shape[0];
    std::size_t f = 1;
    for (std::size_t i = 1; i < shape.size(); ++i)
        f *= shape[i];
    return f;
}

Tensor init_tensor(const Shape &shape, InitScheme scheme, RngStream &rng) {
    Tensor t(shape);
    switch (scheme) {
    case InitScheme::Ones:
        for (auto &v : t.data())
            v = 1.0;
        break;
    case InitScheme::Zeros:
        break;
    case InitScheme::FanInGaussian: {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in(shape)));
        for (auto &v : t.data())
            v = std * rng.normal();
        break;
    }
    }
    return t;
}

double estimate_init_norm(const Shape &shape, InitScheme scheme, std::size_t samples, const RngStream &rng) {
    if (samples < 1)
        throw Error(Errc::ConfigError, "estimate_init_norm needs at least one sample");
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        RngStream draw = rng.substream(s);
        total += norm2(init_tensor(shape, scheme, draw));
    }
    return total / static_cast<double>(samples);
}

RadiusSpec make_radius_spec(RegionKind kind, double w, double init_norm, std::size_t k) {
    if (!(w > 0.0) || !(init_norm > 0.0))
        throw Error(Errc::ConfigError, "diameter multiplier and init norm must be positive");
    RadiusSpec spec;
    spec.w = w;
    spec.init_norm = init_norm;
    spec.diameter = 2.0 * w * init_norm;
    spec.tau = radius_from_diameter(kind, spec.diameter, k);
    return spec;
}

Tensor ensure_feasible(const FeasibleRegion &region, const Tensor &theta) {
    const double value = gauge(region, theta);
    if (value <= region.tau())
        return theta;
    return (region.tau() / value) * theta;
}

} // namespace sfwc
